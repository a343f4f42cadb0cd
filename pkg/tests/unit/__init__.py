# Unit tests for impeq components
