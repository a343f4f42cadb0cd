"""
Integration tests for API endpoints.
"""

import json

from fastapi.testclient import TestClient

from src.impeq.api.main import create_app
from tests.helpers import game_path, profile_path


def document(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestAPI:
    """Integration tests for API endpoints."""

    def setup_method(self):
        """Set up test client."""
        self.app = create_app()
        self.client = TestClient(self.app)
        self.fig3 = document(game_path("fig3"))
        self.separating = document(profile_path("fig3-separating"))

    def test_health_endpoint(self):
        """Test health check endpoint."""
        response = self.client.get("/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert data["version"] == "0.1.0"
        assert data["service"] == "impeq API"

    def test_root_endpoint(self):
        """Test root endpoint."""
        response = self.client.get("/")

        assert response.status_code == 200
        data = response.json()
        assert "message" in data
        assert "docs" in data
        assert "health" in data

    def test_validate(self):
        """Test validating a game document."""
        response = self.client.post("/api/validate", json={"game": self.fig3})

        assert response.status_code == 200
        data = response.json()
        assert data["valid"] is True
        assert data["finals"] == ["one", "zero"]

    def test_validate_bad_game(self):
        """Test that an invalid game is a 400."""
        game = dict(self.fig3, finals=["nowhere"])
        response = self.client.post("/api/validate", json={"game": game})

        assert response.status_code == 400
        assert "nowhere" in response.json()["detail"]

    def test_analyze(self):
        """Test the structural report with an epsilon."""
        game = document(game_path("quit-loop"))
        response = self.client.post("/api/analyze", json={"game": game, "epsilon": "1/10"})

        assert response.status_code == 200
        data = response.json()
        assert data["cycling_states"] == []
        assert data["termination_bound"] == {"k": 4, "p": "9999/10000"}

    def test_eval(self):
        """Test exact payoffs at a state."""
        response = self.client.post(
            "/api/eval",
            json={
                "game": document(game_path("quit-loop")),
                "profile": document(profile_path("quit-loop-eps")),
                "state": "1",
            },
        )

        assert response.status_code == 200
        assert response.json()["at_state"] == {"1": "37/57", "2": "39/57"}

    def test_eval_unknown_state(self):
        """Test that an unknown state is a 404."""
        response = self.client.post(
            "/api/eval",
            json={"game": self.fig3, "profile": self.separating, "state": "nowhere"},
        )

        assert response.status_code == 404

    def test_check_rejected(self):
        """Test that a rejected verdict is still a 200."""
        response = self.client.post(
            "/api/check",
            json={"game": self.fig3, "profile": self.separating, "epsilon": "1/10"},
        )

        assert response.status_code == 200
        data = response.json()
        assert data["accepted"] is False
        assert data["witness"]["player"] == "1"

    def test_check_eps_nash(self):
        """Test the ε-Nash checker on the same profile."""
        response = self.client.post(
            "/api/check",
            json={
                "game": self.fig3,
                "profile": self.separating,
                "kind": "eps-nash",
                "epsilon": "1/10",
                "state": "s",
            },
        )

        assert response.status_code == 200
        assert response.json()["accepted"] is True

    def test_check_unknown_kind(self):
        """Test that an unknown checker is a 400."""
        response = self.client.post(
            "/api/check",
            json={
                "game": self.fig3,
                "profile": self.separating,
                "kind": "bogus",
                "epsilon": "1/10",
            },
        )

        assert response.status_code == 400
        assert "unknown check kind" in response.json()["detail"]

    def test_check_decimal_epsilon(self):
        """Test that decimal epsilons are refused."""
        response = self.client.post(
            "/api/check",
            json={"game": self.fig3, "profile": self.separating, "epsilon": "0.1"},
        )

        assert response.status_code == 400

    def test_value_turn_based(self):
        """Test deviation values through the explicit deviation game."""
        response = self.client.post(
            "/api/value",
            json={
                "game": self.fig3,
                "profile": self.separating,
                "epsilon": "1/10",
                "method": "turn-based",
            },
        )

        assert response.status_code == 200
        data = response.json()
        assert data["values"]["1"]["values"]["s"] == "9/100"
        assert data["values"]["2"]["values"]["s"] == "0"

    def test_value_bad_method(self):
        """Test that the method is validated by the request model."""
        response = self.client.post(
            "/api/value",
            json={
                "game": self.fig3,
                "profile": self.separating,
                "epsilon": "1/10",
                "method": "grid",
            },
        )

        assert response.status_code == 422
