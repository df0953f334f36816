# Test package for the risk-sensitive game solver
