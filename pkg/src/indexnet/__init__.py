"""Index-based tensor networks: order-free tensors, quantum-number block sparsity, MPS/MPO and DMRG."""

from .qn import QN, QNError
from .index import Arrow, Index, IndexSpecError, IndexVal, TagSet, dag, noprime, prime, seed_ids, setprime, sim
from .tensor import (
    ITensor,
    TensorError,
    combinedind,
    combiner,
    commonind,
    commoninds,
    delta,
    diag_itensor,
    random_itensor,
    to_blocksparse,
    uniqueinds,
)
from .decomp import Spectrum, TruncationParams, eigen_hermitian, factorize, qr, svd, truncate_spectrum
from .sitetypes import SiteDef, SiteTypeError, op, register_sitetype, siteinds, state
from .mps import (
    MPO,
    MPS,
    add,
    apply,
    contract_mpo,
    expect,
    identity_mpo,
    inner,
    inner_mpo,
    mps_from_tensor,
    norm,
    product_mps,
    random_mps,
    to_tensor,
    total_flux,
)
from .opsum import OpSum, OpSumError, to_mpo
from .dmrg import EnergyObserver, Observer, Snapshot, Sweeps, dmrg, lanczos_ground

__version__ = "0.1.0"

__all__ = [
    "QN",
    "QNError",
    "Arrow",
    "Index",
    "IndexSpecError",
    "IndexVal",
    "TagSet",
    "dag",
    "noprime",
    "prime",
    "seed_ids",
    "setprime",
    "sim",
    "ITensor",
    "TensorError",
    "combinedind",
    "combiner",
    "commonind",
    "commoninds",
    "delta",
    "diag_itensor",
    "random_itensor",
    "to_blocksparse",
    "uniqueinds",
    "Spectrum",
    "TruncationParams",
    "eigen_hermitian",
    "factorize",
    "qr",
    "svd",
    "truncate_spectrum",
    "SiteDef",
    "SiteTypeError",
    "op",
    "register_sitetype",
    "siteinds",
    "state",
    "MPO",
    "MPS",
    "add",
    "apply",
    "contract_mpo",
    "expect",
    "identity_mpo",
    "inner",
    "inner_mpo",
    "mps_from_tensor",
    "norm",
    "product_mps",
    "random_mps",
    "to_tensor",
    "total_flux",
    "OpSum",
    "OpSumError",
    "to_mpo",
    "EnergyObserver",
    "Observer",
    "Snapshot",
    "Sweeps",
    "dmrg",
    "lanczos_ground",
]
