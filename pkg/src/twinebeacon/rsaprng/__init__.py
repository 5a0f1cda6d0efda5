"""RSA-iteration pseudorandom generator and its number theory."""
from .chain import PrimeChainSpec, exceeds_power, gen_chain_prime, random_prime
from .numtheory import carmichael, euler_phi, factorize, is_probable_prime, multiplicative_order
from .prng import (
    E_MIN,
    PRODUCTION_BITS,
    TOY_BITS,
    PeriodReport,
    RsaKeyMaterial,
    RsaPrng,
    RsaPrngState,
    choose_exponent,
    generate,
    next_bits,
    next_state,
    open_state,
    period_diagnostics,
    random_unit,
    seal_state,
)
from .stats import monobit_pvalue
