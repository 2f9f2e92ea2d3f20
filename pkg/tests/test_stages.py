import pytest

from levelcap.backends import MockRule, ScriptedMockBackend
from levelcap.prompting import load_templates
from levelcap.records import LevelSet, RawMetadata
from levelcap.stages import (
    BudgetStatus,
    DenseDescription,
    FilteredMetadata,
    LevelParseError,
    NoViews,
    check_budgets,
    dense_describe,
    detect_aspects,
    elaborate_levels,
    ethical_filter,
    filter_metadata,
    parse_levels,
    render_levels_block,
)

TEMPLATES = load_templates()

FIVE_SECTION_TEXT = (
    "Structure: a mug with a single handle component.\n"
    "Geometry: cylindrical body, one symmetry axis.\n"
    "Surface: glazed ceramic texture, smooth and reflective.\n"
    "Colors: deep blue fading to white at the rim.\n"
    "Environment: floating against an empty backdrop."
)


def levels_text(**overrides):
    lines = {i: f"level {i} text" for i in range(1, 6)}
    for key, value in overrides.items():
        lines[int(key.removeprefix("level"))] = value
    return "\n".join(f"LEVEL{i}: {lines[i]}" for i in range(1, 6))


def echo_levels_mock():
    def respond(request):
        return "\n".join(
            line for line in request.user_prompt.splitlines() if line.startswith("LEVEL")
        )

    return ScriptedMockBackend(default=respond)


class TestFilterMetadata:
    def test_strips_content_per_script(self):
        mock = ScriptedMockBackend(
            rules=[MockRule(match="contact me at x@y.com", response="a carved oak table")]
        )
        raw = RawMetadata(description="a carved oak table, contact me at x@y.com")
        result = filter_metadata(raw, mock, TEMPLATES["metadata_filter"])
        assert "x@y.com" not in result.text
        assert not result.dropped

    def test_category_passthrough(self):
        mock = ScriptedMockBackend(default=lambda r: "chair")
        result = filter_metadata(
            RawMetadata(category="chair"), mock, TEMPLATES["metadata_filter"]
        )
        assert result.text == "chair"

    def test_empty_answer_means_dropped(self):
        for canned in ("", "NONE", "none."):
            mock = ScriptedMockBackend(default=canned)
            result = filter_metadata(
                RawMetadata(name="x"), mock, TEMPLATES["metadata_filter"]
            )
            if canned == "none.":
                continue  # sentinel must be the whole answer
            assert result.dropped
            assert result.text == ""


class TestDenseDescribe:
    def test_five_sections_all_aspects(self, tmp_path):
        mock = ScriptedMockBackend(default=FIVE_SECTION_TEXT)
        views = [str(tmp_path / f"{t}.png") for t in ("front", "back", "left", "right")]
        dense = dense_describe(views, None, mock, TEMPLATES["dense_description"])
        assert all(dense.aspects_present.values())

    def test_metadata_section_omitted_when_absent(self):
        mock = ScriptedMockBackend(default="text")
        dense_describe(["v.png"] * 4, None, mock, TEMPLATES["dense_description"])
        prompt = mock.requests[0].user_prompt
        assert "Curator notes" not in prompt
        dropped = FilteredMetadata(text="", dropped=True)
        dense_describe(["v.png"] * 4, dropped, mock, TEMPLATES["dense_description"])
        assert "Curator notes" not in mock.requests[1].user_prompt

    def test_metadata_section_present_when_given(self):
        mock = ScriptedMockBackend(default="text")
        meta = FilteredMetadata(text="subject gizmo")
        dense_describe(["v.png"] * 4, meta, mock, TEMPLATES["dense_description"])
        assert "subject gizmo" in mock.requests[0].user_prompt

    def test_zero_views_error(self):
        with pytest.raises(NoViews):
            dense_describe([], None, ScriptedMockBackend(), TEMPLATES["dense_description"])

    def test_detect_aspects_partial(self):
        flags = detect_aspects("Structure: a box. Colors: red.")
        assert flags["structural"] and flags["chromatic"]
        assert not flags["surface"]


class TestParseLevels:
    def test_round_trip(self):
        levels = parse_levels(levels_text())
        assert levels.get(1) == "level 1 text"
        assert levels.get(5) == "level 5 text"

    def test_tolerates_surrounding_prose_and_markdown(self):
        text = "Here you go:\n\n- LEVEL1: one\nLEVEL2: two\ncontinues here\n" + "\n".join(
            f"LEVEL{i}: t{i}" for i in (3, 4, 5)
        )
        levels = parse_levels(text)
        assert levels.level1 == "one"
        assert levels.level2 == "two continues here"

    def test_missing_level_raises(self):
        with pytest.raises(LevelParseError) as err:
            parse_levels("LEVEL1: a\nLEVEL2: b\nLEVEL3: c\nLEVEL4: d")
        assert err.value.missing == [5]


class TestElaborateLevels:
    def test_structured_round_trip(self):
        mock = ScriptedMockBackend(default=levels_text())
        levels = elaborate_levels(
            DenseDescription(text="desc"), mock, TEMPLATES["level_elaboration"]
        )
        assert levels.get(3) == "level 3 text"
        assert mock.call_count == 1

    def test_four_levels_fails_after_one_retry(self):
        bad = "\n".join(f"LEVEL{i}: x" for i in range(1, 5))
        mock = ScriptedMockBackend(default=bad)
        with pytest.raises(LevelParseError):
            elaborate_levels(
                DenseDescription(text="desc"), mock, TEMPLATES["level_elaboration"]
            )
        assert mock.call_count == 2  # one re-ask with a stricter reminder
        assert "could not be parsed" in mock.requests[1].user_prompt

    def test_retry_can_recover(self):
        calls = {"n": 0}

        def respond(request):
            calls["n"] += 1
            return "gibberish" if calls["n"] == 1 else levels_text()

        mock = ScriptedMockBackend(default=respond)
        levels = elaborate_levels(
            DenseDescription(text="desc"), mock, TEMPLATES["level_elaboration"]
        )
        assert levels.get(1) == "level 1 text"

    def test_budget_conformant_fixture_all_within(self):
        # hand-built: 150/100/50/20/12 words by construction
        counts = {1: 150, 2: 100, 3: 50, 4: 20, 5: 12}
        text = "\n".join(
            f"LEVEL{i}: " + " ".join(f"w{i}x{k}" for k in range(counts[i])) for i in counts
        )
        mock = ScriptedMockBackend(default=text)
        levels = elaborate_levels(
            DenseDescription(text="desc"), mock, TEMPLATES["level_elaboration"]
        )
        report = check_budgets(levels)
        assert all(status is BudgetStatus.WITHIN for _, status in report.levels.values())


class TestEthicalFilter:
    def _levels(self):
        return parse_levels(levels_text(level2="made by Dante Alighieri's workshop"))

    def test_identity_mock(self):
        levels = self._levels()
        out = ethical_filter(levels, echo_levels_mock(), TEMPLATES["ethical_filter"])
        assert out == levels

    def test_famous_name_retained_private_name_stripped(self):
        def respond(request):
            lines = []
            for line in request.user_prompt.splitlines():
                if line.startswith("LEVEL"):
                    lines.append(line.replace("by joe's workshop", "by a workshop"))
            return "\n".join(lines)

        levels = parse_levels(
            levels_text(
                level1="statue of Dante Alighieri by joe's workshop",
            )
        )
        out = ethical_filter(levels, ScriptedMockBackend(default=respond), TEMPLATES["ethical_filter"])
        assert "Dante Alighieri" in out.level1
        assert "joe" not in out.level1

    def test_emptied_level_flags_downstream(self, tmp_path):
        from levelcap.records import AssetRecord, Dataset, ViewRef, validate_record

        def respond(request):
            lines = [
                line for line in request.user_prompt.splitlines() if line.startswith("LEVEL")
            ]
            return "\n".join(l if not l.startswith("LEVEL5") else "LEVEL5:" for l in lines)

        out = ethical_filter(
            self._levels(), ScriptedMockBackend(default=respond), TEMPLATES["ethical_filter"]
        )
        record = AssetRecord(
            asset_id="a",
            dataset=Dataset.OBJAVERSE,
            source_uri="a.glb",
            views=[ViewRef("front", "f.png")],
        )
        assert not validate_record(record, out).keep


class TestCheckBudgets:
    def _with_counts(self, counts):
        return LevelSet(
            **{f"level{i}": " ".join(f"w{k}" for k in range(counts[i])) for i in range(1, 6)}
        )

    def test_level1_175_within(self):
        report = check_budgets(self._with_counts({1: 175, 2: 120, 3: 60, 4: 20, 5: 12}))
        assert report.levels[1] == (175, BudgetStatus.WITHIN)

    def test_level4_44_over(self):
        report = check_budgets(self._with_counts({1: 175, 2: 120, 3: 60, 4: 44, 5: 12}))
        assert report.levels[4] == (44, BudgetStatus.OVER)

    def test_empty_level_under_with_zero(self):
        report = check_budgets(self._with_counts({1: 175, 2: 0, 3: 60, 4: 0, 5: 12}))
        assert report.levels[2] == (0, BudgetStatus.UNDER)
        assert report.levels[4] == (0, BudgetStatus.UNDER)

    def test_idempotent_and_pure(self):
        levels = self._with_counts({1: 160, 2: 110, 3: 70, 4: 25, 5: 15})
        first = check_budgets(levels)
        second = check_budgets(levels)
        assert first.levels == second.levels
        assert levels.get(1).startswith("w0")


class TestChainPurity:
    def test_stage_chain_is_pure_under_deterministic_mocks(self, tmp_path):
        from conftest import stage_mocks

        views = [str(tmp_path / f"{t}.png") for t in ("front", "back", "left", "right")]
        raw = RawMetadata(name="subject widget-1")

        def run_chain():
            mocks = stage_mocks()
            meta = filter_metadata(raw, mocks["metadata_filter"], TEMPLATES["metadata_filter"])
            dense = dense_describe(
                views, meta, mocks["dense_description"], TEMPLATES["dense_description"]
            )
            levels = elaborate_levels(
                dense, mocks["level_elaboration"], TEMPLATES["level_elaboration"]
            )
            return ethical_filter(levels, mocks["ethical_filter"], TEMPLATES["ethical_filter"])

        assert run_chain() == run_chain()

    def test_metadata_changes_only_prompt_not_sequence(self, tmp_path):
        from conftest import stage_mocks

        views = [str(tmp_path / f"{t}.png") for t in ("front", "back", "left", "right")]
        for raw in (RawMetadata(name="subject widget-1"), None):
            mocks = stage_mocks()
            meta = None
            if raw is not None:
                meta = filter_metadata(
                    raw, mocks["metadata_filter"], TEMPLATES["metadata_filter"]
                )
            dense = dense_describe(
                views, meta, mocks["dense_description"], TEMPLATES["dense_description"]
            )
            levels = elaborate_levels(
                dense, mocks["level_elaboration"], TEMPLATES["level_elaboration"]
            )
            out = ethical_filter(levels, mocks["ethical_filter"], TEMPLATES["ethical_filter"])
            assert all(text.strip() for _, text in out.items())


def test_render_levels_block_format():
    block = render_levels_block(parse_levels(levels_text()))
    assert block.splitlines()[0] == "LEVEL1: level 1 text"
    assert len(block.splitlines()) == 5
