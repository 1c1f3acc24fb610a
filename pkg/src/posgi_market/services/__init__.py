"""Service layer of the market simulator."""
