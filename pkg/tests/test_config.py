import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixpersist.config import ConfigError, ExperimentConfig, emit_config, parse_config
from mixpersist.persistence import GridPolicy
from mixpersist.processes import ProcessSpec

from test_processes import specs

names = st.text("abcdefghijklmnopqrstuvwxyz-_0123456789", min_size=1, max_size=20)
roles = st.text("abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12)


@st.composite
def configs(draw):
    ladder = sorted(set(draw(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=8))))
    grid = GridPolicy(
        draw(st.sampled_from(["lamperti", "uniform"])),
        draw(st.integers(2, 10**5)),
        draw(st.floats(1e-9, 1.0)),
        draw(st.booleans()),
    )
    return ExperimentConfig(
        entry=draw(names),
        experiment_id=draw(names),
        master_seed=draw(st.integers(0, 2**64 - 1)),
        out_dir=draw(names),
        threads=draw(st.integers(1, 64)),
        n_paths=draw(st.integers(100, 10**7)),
        ladder=tuple(ladder),
        burn_in=draw(st.integers(0, 5)),
        level=draw(st.floats(-10, 10)),
        grid=grid,
        specs=tuple(draw(st.dictionaries(roles, specs(), max_size=3)).items()),
    )


@given(configs())
def test_round_trip(cfg):
    assert parse_config(emit_config(cfg)) == cfg


def test_defaults_and_spec_lookup():
    cfg = parse_config("[experiment]\nentry = bm-oracle\n[specs]\nprocess = fbm(H=0.3)\n")
    assert cfg.experiment_id == "bm-oracle"
    assert cfg.ladder == tuple(float(2**k) for k in range(4, 13))
    assert cfg.spec("process", ProcessSpec.brownian()) == ProcessSpec.fbm(0.3)
    assert cfg.spec("other", ProcessSpec.brownian()) == ProcessSpec.brownian()


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("[experiment]\nentry = x\ncolour = red\n", "line 3: [experiment] colour: unknown key"),
        ("[experiment]\nentry = x\n[plots]\n", "line 3: [plots]: unknown section"),
        ("[experiment]\nentry = x\n[estimation]\nn_paths = lots\n", "line 4: [estimation] n_paths"),
        ("[experiment]\nentry = x\n[specs]\nm = fbm(H=2)\n", "line 4: [specs] m"),
        ("[estimation]\nn_paths = 1000\n", "entry is required"),
        ("[experiment]\nentry = x\n[estimation]\nladder = 4, 2\n", "strictly increasing"),
        ("[experiment]\nentry = x\n[grid]\npolicy = hexagonal\n", "grid policy"),
        ("no section header\n", "malformed"),
    ],
)
def test_diagnostics(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)
