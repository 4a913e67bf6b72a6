# End-to-end pass simulation over all subsystem stages
from simulation.pass_runner import PassSimulator, RunReport, block_times, run_pass

__all__ = [
    "PassSimulator",
    "RunReport",
    "block_times",
    "run_pass",
]
