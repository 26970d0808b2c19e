import pytest
from hypothesis import given, strategies as st

from fusesim.model import (
    AppSpec, CallEdge, ConfigError, FusionGroup, FusionSetup, HomeNotMember, IOCall,
    MissingTask, NotationError, PlatformConfig, TaskSpec, format_setup, parse_setup_notation,
    single_group_setup, singleton_setup, validate_setup,
)
from fusesim.workloads import make_tree_app


def abc_app():
    return AppSpec([TaskSpec("A", 1, calls=[CallEdge("B"), CallEdge("C", "ASYNC")]),
                    TaskSpec("B", 1), TaskSpec("C", 1)], ("A",))


def test_parse_two_groups():
    s = parse_setup_notation("(A,B)-(C)", abc_app())
    assert [set(g.members) for g in s.groups] == [{"A", "B"}, {"C"}]
    assert s.home == {"A": "g0", "B": "g0", "C": "g1"}


def test_parse_single():
    app = AppSpec([TaskSpec("A")], ("A",))
    s = parse_setup_notation("(A)", app)
    assert s.home == {"A": "g0"} and len(s.groups) == 1


def test_parse_tree_path_setup():
    s = parse_setup_notation("(A,B,D,E)-(C)-(F)-(G)", make_tree_app())
    assert [sorted(g.members) for g in s.groups] == [["A", "B", "D", "E"], ["C"], ["F"], ["G"]]


def test_parse_memory_suffix():
    s = parse_setup_notation("(A,B)@128-(C)@1024")
    assert s.memory_map() == {"g0": 128, "g1": 1024}
    assert s.notation() == "(A,B)@128-(C)@1024"


def test_parse_multi_membership_home_is_first_group():
    s = parse_setup_notation("(A,B)-(B,C)")
    assert s.home["B"] == "g0"


@pytest.mark.parametrize("text,pos", [("", 0), ("(A", 2), ("A)", 0), ("(A)-", 4), ("()", 0),
                                      ("(A,A)", 3), ("(A)@x", 4)])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(NotationError) as err:
        parse_setup_notation(text)
    assert err.value.position == pos


def test_parse_rejects_unknown_and_missing_tasks():
    with pytest.raises(NotationError):
        parse_setup_notation("(A,B)-(X)", abc_app())
    with pytest.raises(NotationError):
        parse_setup_notation("(A,B)", abc_app())


def test_format_sorts():
    s = FusionSetup((FusionGroup("g0", {"C"}), FusionGroup("g1", {"B", "A"})),
                    {"A": "g1", "B": "g1", "C": "g0"})
    assert format_setup(s) == "(A,B)-(C)"
    assert format_setup(FusionSetup((FusionGroup("x", {"A"}),), {"A": "x"})) == "(A)"


names = st.sampled_from(list("ABCDEFGH"))


@st.composite
def canonical_strings(draw):
    tasks = draw(st.lists(names, min_size=1, max_size=8, unique=True))
    k = draw(st.integers(1, len(tasks)))
    labels = draw(st.lists(st.integers(0, k - 1), min_size=len(tasks), max_size=len(tasks)))
    blocks = {}
    for t, lab in zip(tasks, labels):
        blocks.setdefault(lab, []).append(t)
    groups = sorted(sorted(b) for b in blocks.values())
    return "-".join("(" + ",".join(g) + ")" for g in groups)


@given(canonical_strings())
def test_notation_round_trip(text):
    assert format_setup(parse_setup_notation(text)) == text


def test_validate_ok_and_violations():
    app = abc_app()
    assert validate_setup(parse_setup_notation("(A,B)-(C)", app), app) == []
    partial = FusionSetup((FusionGroup("g0", {"A", "B"}),), {"A": "g0", "B": "g0"})
    assert MissingTask("C") in validate_setup(partial, app)
    bad_home = FusionSetup((FusionGroup("g0", {"A", "B"}), FusionGroup("g1", {"C"})),
                           {"A": "g0", "B": "g0", "C": "g0"})
    assert validate_setup(bad_home, app) == [HomeNotMember("C", "g0")]


def test_validate_memory_against_platform():
    app = abc_app()
    s = parse_setup_notation("(A,B)@100-(C)", app)
    kinds = [v.kind for v in validate_setup(s, app, PlatformConfig())]
    assert kinds == ["InvalidMemory"]


def test_app_validation():
    with pytest.raises(ConfigError):
        AppSpec([TaskSpec("A", calls=[CallEdge("Z")])], ("A",))
    with pytest.raises(ConfigError):
        AppSpec([TaskSpec("A")], ("B",))
    with pytest.raises(ConfigError):
        AppSpec([TaskSpec("A"), TaskSpec("A")], ("A",))
    with pytest.raises(ConfigError):
        TaskSpec("A", -1)
    with pytest.raises(ConfigError):
        TaskSpec("A", 1, 0)
    with pytest.raises(ConfigError):
        TaskSpec("A", io_calls=[IOCall("db", -1)])


def test_platform_config_validation():
    with pytest.raises(ConfigError):
        PlatformConfig(memory_sizes_mb=(1024, 768))
    with pytest.raises(ConfigError):
        PlatformConfig(remote_sync_overhead_ms=-1)
    assert PlatformConfig().all_sizes == (128, 768, 1024, 1536, 1650, 2048, 3000, 4096, 6144)


def test_common_setups():
    app = make_tree_app()
    assert format_setup(singleton_setup(app)) == "(A)-(B)-(C)-(D)-(E)-(F)-(G)"
    assert format_setup(single_group_setup(app)) == "(A,B,C,D,E,F,G)"
