import logging
from typing import AbstractSet, Iterable, List, MutableSet

logger = logging.getLogger(__name__)


def update_annecs(
    counted: MutableSet[int],
    mc_passed: AbstractSet[int],
    solved_env_ids: Iterable[int],
) -> List[int]:
    """Add environments that both passed the minimal criterion and were ever solved.

    ``counted`` is updated in place and only ever grows, so each environment is counted
    once no matter how often it is solved afterwards, active or archived. Returns the
    newly counted env ids in ascending order.
    """
    fresh = sorted(e for e in solved_env_ids if e in mc_passed and e not in counted)
    counted.update(fresh)
    for env_id in fresh:
        logger.info("ANNECS +1: environment %d created and solved", env_id)
    return fresh
