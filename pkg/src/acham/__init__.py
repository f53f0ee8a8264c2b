"""Rounding of almost-commuting 2-local qubit Hamiltonians to commuting ones."""
