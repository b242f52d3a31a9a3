"""Classical point-charge electrodynamics in 4D and 6D flat spacetime."""
