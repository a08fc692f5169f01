"""Error metrics: forward, residual, Karlson–Waldén backward error."""
