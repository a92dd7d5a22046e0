import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedfaas.agent import ProviderConfig, ScaleAction, StrategySnapshot, strategy_tick


def snap(pending=0, idle=0, active=0, blocks=0):
    return StrategySnapshot(pending, idle, active, blocks)


def cfg(**kw):
    kw.setdefault("max_blocks", 4)
    return ProviderConfig(**kw)


def test_pending_over_idle_requests_block():
    actions = strategy_tick(snap(pending=10, idle=0, blocks=0), cfg())
    assert actions == [ScaleAction("request_block")]


def test_respects_max_blocks():
    assert strategy_tick(snap(pending=100, idle=0, blocks=4), cfg()) == []
    actions = strategy_tick(snap(pending=100, idle=0, blocks=2), cfg())
    assert len(actions) == 2  # ceil(100/10)=10, clamped to max-current


def test_scale_up_threshold_rate():
    actions = strategy_tick(snap(pending=25, idle=0, blocks=0), cfg())
    assert len(actions) == 3  # ceil(25/10)


def test_idle_block_released_after_max_idle():
    c = cfg(min_blocks=0, max_idle=120.0)
    actions = strategy_tick(snap(idle=8, blocks=1), c, {"b1": 121.0})
    assert actions == [ScaleAction("release_block", "b1")]
    assert strategy_tick(snap(idle=8, blocks=1), c, {"b1": 119.0}) == []


def test_min_blocks_floor():
    c = cfg(min_blocks=1, max_blocks=4)
    assert strategy_tick(snap(pending=0, idle=50, blocks=1), c, {"b1": 500.0}) == []
    # below the floor: request back up even with no demand
    assert strategy_tick(snap(blocks=0), c) == [ScaleAction("request_block")]


def test_longest_idle_released_first():
    c = cfg(min_blocks=1, max_blocks=4)
    actions = strategy_tick(
        snap(idle=8, blocks=3), c, {"b1": 130.0, "b2": 500.0, "b3": 121.0}
    )
    assert [a.block_id for a in actions] == ["b2", "b1"]  # keeps min_blocks=1


def test_config_validation():
    with pytest.raises(ValueError):
        ProviderConfig(min_blocks=3, max_blocks=1)
    with pytest.raises(ValueError):
        ProviderConfig(workers_per_node=0)
    with pytest.raises(ValueError):
        StrategySnapshot(-1, 0, 0, 0)


@given(
    st.integers(0, 200),
    st.integers(0, 64),
    st.integers(0, 6),
    st.dictionaries(st.sampled_from(["b1", "b2", "b3"]), st.floats(0, 1000), max_size=3),
    st.integers(0, 2),
    st.integers(2, 6),
)
@settings(max_examples=500)
def test_release_safety_property(pending, idle, blocks, block_idle, min_b, max_b):
    # Released blocks are always (a) idle past max_idle, (b) never drop the
    # count below min_blocks, and (c) never coincide with scale-up.
    c = ProviderConfig(min_blocks=min_b, max_blocks=max_b, max_idle=120.0)
    block_idle = dict(list(block_idle.items())[:blocks])
    actions = strategy_tick(snap(pending, idle, blocks=blocks), c, block_idle)
    releases = [a for a in actions if a.op == "release_block"]
    requests = [a for a in actions if a.op == "request_block"]
    assert not (releases and requests)
    for a in releases:
        assert block_idle[a.block_id] >= 120.0
    assert blocks - len(releases) >= min_b or blocks < min_b
    assert blocks + len(requests) <= max(max_b, blocks)
