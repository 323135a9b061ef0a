import numpy as np
import pytest

from abreformat.dataset import AMINO_ACIDS, Orientation, ReformatRecord, aggregate_by_signature
from abreformat.experiment import FeatureSet
from abreformat.synthetic import GenConfig, generate


def record(i=0, vh="EVQLV", vl="DIQMT", linker="L1", orientation="VH_VL", family="F1",
           campaign="C1", qc=1, yld=10.0, sec=95.0):
    return ReformatRecord(f"r{i}", vh, vl, linker, Orientation(orientation), family, campaign,
                          qc, yld, sec)


def random_sigset(rng, family_sizes, n_linkers=2):
    """SignatureSet with the given family sizes and random short sequences."""
    recs = []
    for f, size in enumerate(family_sizes):
        for k in range(size):
            vh = "".join(rng.choice(list(AMINO_ACIDS), 12))
            recs.append(record(len(recs), vh=vh, family=f"F{f:02d}",
                               linker=f"L{k % n_linkers}", qc=int(rng.integers(2))))
    return aggregate_by_signature(recs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A 300-signature synthetic dataset written to disk, with its features."""
    ds = generate(GenConfig(n_families=12, n_signatures=300, seed=7))
    d = tmp_path_factory.mktemp("small")
    ds.write(d)
    sigs = ds.signatures()
    return ds, d, sigs, FeatureSet.from_data_dir(sigs, d)
