"""Command-line experiments and data handling."""
