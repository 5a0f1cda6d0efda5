"""Hash-committed PRNG chain combining three local sources."""
from .chain import (
    COMMITMENT_BREAK,
    ZERO_SALT,
    PrngChainWriter,
    PrngPayload,
    build_prng_pulse,
    output_value,
    verify_prng_pair,
)
from .journal import CommitmentJournal
from .sources import (
    ChaChaSource,
    DeviceSource,
    EntropySource,
    FixedSource,
    RsaSource,
    SystemSource,
    combine_sources,
    external_source,
    read_all,
)
