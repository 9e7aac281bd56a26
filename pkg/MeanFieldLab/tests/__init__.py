"""Unit and end-to-end tests for MeanFieldLab."""
