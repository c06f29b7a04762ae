from dataclasses import dataclass

from tslim.constants import DEFAULT_OUTPUT_DIR, DEFAULT_SEED


# All dataclass vars need to be declared with a type, otherwise they are silently
# ignored.
@dataclass
class Help:
    # Printed using the description attribute of the ArgumentParser at the start of
    # the help output.
    help_doc: str = """
        Thermodynamic speed limits of learning: compare the time a training run takes
        with the minimal time allowed by its Wasserstein-2 transport cost and its
        entropy production. Each subcommand reads a JSON config file and writes
        tab separated plot data and a summary.json to the output folder."""

    version: str = "Output version information."

    verbosity: str = """
        More verbose output for each v, e.g. -vv. Without -v only warnings and errors
        are shown."""
    multicore: str = """
        Run independent sweep points (seeds, inverse temperatures) in parallel
        processes."""

    config: str = "JSON config file with the parameters of the experiment."
    out: str = f"""
        Output folder (default {DEFAULT_OUTPUT_DIR}, or output_dir of the config
        file)."""
    seed: str = f"""
        Seed of the numpy random streams (default {DEFAULT_SEED}, or seed of the config
        file)."""

    ntk_scaling: str = """
        Power-law NTK spectrum: speed limit quantities over a range of horizons,
        fitted log-log exponents and the predicted scaling regime."""
    ntk_inefficiency: str = """
        Ratio of the speed limit to the actual training time for a power-law or
        explicit NTK spectrum."""
    linreg_finite: str = """
        Exact speed limit of Bayesian linear regression on teacher-generated data,
        averaged over seeds."""
    linreg_asymptotic: str = """
        Speed limit of Bayesian linear regression in the proportional limit
        d, n -> infinity with d/n = gamma, and its parameter limits."""
    langevin_sim: str = """
        Euler-Maruyama ensemble on a quadratic potential, compared with the exact
        Ornstein-Uhlenbeck moments."""
    analyze: str = """
        Cold and warm start speed limit reports for a recorded training trajectory
        archive."""

    warm_start: str = """
        Checkpoint INDEX where the warm start begins; overrides warm_start of the
        config file and of the archive manifest."""
    triplets: str = """
        Weight index triplets "i,j,k;i,j,k;..." whose trajectories are written to
        triplets_i_j_k.tsv; overrides triplets of the config file."""
