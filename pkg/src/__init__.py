"""BNS stochastic volatility: simulation, moment engine, explicit estimator and asymptotics."""
