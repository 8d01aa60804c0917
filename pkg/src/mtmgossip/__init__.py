"""Random diffusion gossip in the round-based and asynchronous mobile telephone models."""

from .amtm import DelayBounds, check_guarantees, run_async
from .analysis import check_min_matching, check_trace_invariants, productive_subgraph, theoretical_budget
from .expansion import boundary, check_gamma_bound, max_bipartite_matching, vertex_expansion
from .graph import (
    Graph,
    from_edge_list,
    gen_complete,
    gen_path,
    gen_random_connected,
    gen_ring,
    gen_star,
    gen_star_clique,
)
from .sync import run_until_complete

__version__ = "0.1.0"
