"""Measured hardware figures that are reported but not used by the models.

Isolation-profile energies live in ``profiles.json``.
"""

J_PER_KWH = 3.6e6

# mean time from power-on / sandbox setup to network callback
UVM_BOOT_S = 2.47
SOC_BOOT_S = 3.16
SOC_KERNEL_BOOT_S = 0.077

# energy of a single, non-concurrent uVM start (J)
UVM_SINGLE_START_J = 335.81

SERVER_IDLE_W = 120.0
SERVER_MAX_W = 330.0
SERVER_VCPUS = 48
SOC_IDLE_W = 0.6
SOC_MAX_W = 3.6

# LINPACK efficiency, GFLOP/W
SERVER_GFLOP_PER_W = 2.58
SOC_GFLOP_PER_W = 0.45

# request rate used for linear extrapolation to a hyperscaler
LAMBDA_RPS = 4_000_000
