import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from translink.errors import DataError
from translink.translit import (
    default_syllable_map,
    has_distinct_variant,
    load_syllable_map,
    segment_pinyin,
    to_wade_giles,
)

SMAP = default_syllable_map()


def test_shipped_table_spot_values():
    assert SMAP.pairs["cai"] == "tsai"
    assert SMAP.pairs["zhen"] == "chen"
    assert SMAP.pairs["zheng"] == "cheng"
    assert SMAP.pairs["wang"] == "wang"
    assert SMAP.pairs["xiao"] == "hsiao"
    assert SMAP.pairs["gui"] == "kuei"
    assert SMAP.pairs["si"] == "ssu"
    assert SMAP.pairs["ri"] == "jih"
    assert SMAP.pairs["ju"] == "chu"


def test_shipped_table_is_normalized():
    for k, v in SMAP.pairs.items():
        assert k == k.lower() and k.isascii() and k.isalpha(), k
        assert v == v.lower() and v.isascii() and v.isalpha(), v


def test_worked_example_variants():
    # B-side surnames from the worked example: wang has no distinct
    # Wade-Giles spelling; cai and zhen do.
    assert to_wade_giles("wang", SMAP).wade_giles == "wang"
    assert not has_distinct_variant("wang", SMAP)
    assert to_wade_giles("cai", SMAP).wade_giles == "tsai"
    assert has_distinct_variant("cai", SMAP)
    assert to_wade_giles("zhen", SMAP).wade_giles == "chen"
    assert has_distinct_variant("zhen", SMAP)


def test_multisyllable_conversion():
    v = to_wade_giles("meiling", SMAP)
    assert v.segmentation == ("mei", "ling")
    assert v.wade_giles == "meiling"
    v = to_wade_giles("zhengxiao", SMAP)
    assert v.segmentation == ("zheng", "xiao")
    assert v.wade_giles == "chenghsiao"


def test_separators_are_hard_boundaries():
    syl, ok = segment_pinyin("mei-ling", SMAP)
    assert ok and syl == ("mei", "ling")
    syl, ok = segment_pinyin("mei ling", SMAP)
    assert ok and syl == ("mei", "ling")
    v = to_wade_giles("mei-ling", SMAP)
    assert v.pinyin == "meiling"


def test_greedy_longest_match():
    # "xian" is a syllable of its own; greedy must not split it.
    assert segment_pinyin("xian", SMAP) == (("xian",), True)
    # greedy has no backtracking: "mien" = mi+en would work, but greedy
    # grabs "mie" first and then fails on the residue "n".
    syl, ok = segment_pinyin("mien", SMAP)
    assert not ok and syl == ("mien",)


def test_unsegmentable_passthrough():
    v = to_wade_giles("mary", SMAP)
    assert v.unsegmentable
    assert v.wade_giles == "mary"
    assert v.pinyin == "mary"
    assert v.segmentation == ("mary",)
    assert not has_distinct_variant("mary", SMAP)


def test_empty_name_is_unsegmentable():
    syl, ok = segment_pinyin("", SMAP)
    assert not ok


def test_double_application_fixpoint():
    # Names whose Wade-Giles spelling is not itself parseable as pinyin
    # must be left unchanged by a second conversion.
    for name in ["xiao", "cixi", "riguang"]:
        wg = to_wade_giles(name, SMAP).wade_giles
        second = to_wade_giles(wg, SMAP)
        if second.unsegmentable:
            assert second.wade_giles == wg


syllable_lists = st.lists(
    st.sampled_from(sorted(SMAP.pairs)), min_size=1, max_size=4
)


@settings(max_examples=200)
@given(syllable_lists)
def test_segmentation_rejoins_to_input(syls):
    name = "".join(syls)
    seg, ok = segment_pinyin(name, SMAP)
    if ok:
        assert "".join(seg) == name
        v = to_wade_giles(name, SMAP)
        assert v.pinyin == name
        assert v.wade_giles == "".join(SMAP.pairs[s] for s in seg)
    else:
        assert seg == (name,)


@settings(max_examples=100)
@given(syllable_lists)
def test_hyphenated_rejoins_to_stripped_input(syls):
    name = "-".join(syls)
    seg, ok = segment_pinyin(name, SMAP)
    if ok:
        assert "".join(seg) == name.replace("-", "")


def test_loader_rejects_malformed_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n")
    with pytest.raises(DataError, match="line 1"):
        load_syllable_map(p)
    p.write_text("ok,ok\nUpper,case\n")
    with pytest.raises(DataError, match="line 2"):
        load_syllable_map(p)
    p.write_text("dup,a\ndup,b\n")
    with pytest.raises(DataError, match="duplicate"):
        load_syllable_map(p)
    p.write_text("# nothing but comments\n")
    with pytest.raises(DataError, match="no syllable rows"):
        load_syllable_map(p)


def test_loader_accepts_comments_and_blanks(tmp_path):
    p = tmp_path / "ok.csv"
    p.write_text("# header\n\nfoo,bar\n  baz,qux  \n")
    m = load_syllable_map(p)
    assert m.pairs == {"foo": "bar", "baz": "qux"}
    assert m.max_key_len == 3
