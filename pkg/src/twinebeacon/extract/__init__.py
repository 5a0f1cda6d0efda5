"""Seeded randomness extraction for Bell test outputs."""
from .design import WeakDesign, degree_cap, design_set, weak_design
from .extractor import bits_to_bytes, extract, extract_with
from .gf2 import irreducible, is_irreducible, mulmod
from .params import ExtractorParams, ceil_log2, find_prime, is_prime, prime_bound, seed_blocks, seed_length
from .rsh import coefficient_words, rsh_bit, rsh_bits_bulk, split_seed_block
from .seed import expand_seed, pulse_bytes
