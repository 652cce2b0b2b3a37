"""Director-field relaxation for a nematic cell patterned with square posts."""
from .director import DirectorField, Topology, trial_field
from .energy import ElasticConstants, EnergyBreakdown, energy_breakdown
from .experiments import SweepSpec, run_single, sweep_heights
from .geometry import CellParams, build_geometry
from .relax import RelaxOptions, relax
from .topology import diagnose

__version__ = "0.1.0"

__all__ = ["CellParams", "DirectorField", "ElasticConstants", "EnergyBreakdown", "RelaxOptions",
           "SweepSpec", "Topology", "build_geometry", "diagnose", "energy_breakdown", "relax",
           "run_single", "sweep_heights", "trial_field"]
