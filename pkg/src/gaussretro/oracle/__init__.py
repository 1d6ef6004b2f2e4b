"""Independent oracles: truncated Fock space and Monte Carlo chains."""
