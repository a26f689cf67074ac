"""anyhop cli package."""
