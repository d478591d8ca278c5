"""Measured Renyi and measured relative entropies of quantum states and channels via SDP."""
