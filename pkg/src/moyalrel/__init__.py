"""Phase-space (Weyl-Wigner-Moyal) tools for a relativistic spin-0 particle."""
import os as _os

# Cap BLAS/OpenMP pools before numpy loads them.
_threads = _os.environ.get("MOYALREL_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .phasegrid import GridField, MomentumLine, PhaseGrid, UnitSystem, make_grid  # noqa: E402
from .starcalc import (  # noqa: E402
    OperatorMatrix,
    Symbol,
    anti_moyal_bracket,
    moyal_bracket,
    poisson_bracket,
    star,
    star_sqrt,
    weyl_quantize,
    weyl_symbol,
)
from .relkin import EnergyRep, Spectrum, TwoComponentState, dispersion, free_spectrum, fv_evolve  # noqa: E402
from .wigner import WavePacketSpec, WignerComponents, coherent_state, decompose, total  # noqa: E402
from .evolution import EvolutionConfig, Trajectory, evolve  # noqa: E402
from .quantcheck import QuantizationReport, verify  # noqa: E402
