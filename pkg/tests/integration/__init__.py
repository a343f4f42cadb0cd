# Integration tests for impeq
