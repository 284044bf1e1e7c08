"""Tests for scene files, connection files and the command handlers."""

import csv

import numpy as np
import pytest

from linkcurv.cli.main import main
from linkcurv.cli.schemas import CommandFlags
from linkcurv.cli.services import (
    CSV_COLUMNS,
    EXIT_NONCONVERGENCE,
    EXIT_OK,
    apply_flags,
    parse_connection,
    parse_scene,
    run_command,
    serialize_scene,
)
from linkcurv.core.exceptions import (
    AppValidationError,
    DuplicateIdentifierError,
    NotFoundError,
    SceneParseError,
    UncoloredMatterError,
)
from linkcurv.geometry.models import DiskPatch


@pytest.fixture
def hopf_text(scenes_dir) -> str:
    return (scenes_dir / "hopf_disk.scene").read_text(encoding="utf-8")


class TestParseScene:
    def test_hopf_disk(self, hopf_disk_scene):
        """The shipped scene should parse into one matter and one geometric loop."""
        scene = hopf_disk_scene
        assert scene.name == "hopf_disk"
        assert scene.charge == 0.25
        assert [lp.name for lp in scene.matter.loops] == ["matter"]
        assert scene.matter.colors[0].to_strings() == ("1/2", "1/2")
        assert [lp.name for lp in scene.geometric.loops] == ["ring"]
        assert isinstance(scene.surface.patches[0], DiskPatch)

    def test_empty_surface(self, empty_surface_scene):
        """A scene without surfaces should have no surface."""
        assert empty_surface_scene.surface is None
        assert not empty_surface_scene.has_surface

    def test_missing_file(self, tmp_path):
        """A missing file should raise NotFoundError."""
        with pytest.raises(NotFoundError):
            parse_scene(tmp_path / "nope.scene")

    def test_toml_syntax_error(self, tmp_path):
        """TOML syntax errors should carry the line number."""
        path = tmp_path / "bad.scene"
        path.write_text('name = "x"\ncharge = \n', encoding="utf-8")
        with pytest.raises(SceneParseError) as exc:
            parse_scene(path)
        assert exc.value.line == 2
        assert exc.value.code == "PARSE_ERROR"

    def test_schema_error_located(self, tmp_path, hopf_text):
        """A schema violation should point at the offending key."""
        path = tmp_path / "bad.scene"
        path.write_text(hopf_text.replace("radius = 1.0", "radius = -1.0"), encoding="utf-8")
        with pytest.raises(SceneParseError) as exc:
            parse_scene(path)
        assert exc.value.line == 30
        assert "radius" in exc.value.message

    def test_unknown_key(self, tmp_path, hopf_text):
        """Unknown keys should be rejected."""
        path = tmp_path / "bad.scene"
        path.write_text(hopf_text.replace("charge = 0.25", "charge = 0.25\nspin = 1"), "utf-8")
        with pytest.raises(SceneParseError):
            parse_scene(path)

    def test_duplicate_loop_names(self, tmp_path, hopf_text):
        """A repeated loop name should be reported with its line."""
        path = tmp_path / "dup.scene"
        path.write_text(hopf_text.replace('name = "ring"', 'name = "matter"'), "utf-8")
        with pytest.raises(DuplicateIdentifierError) as exc:
            parse_scene(path)
        assert exc.value.message.startswith("line 15:")

    def test_require_colors(self, tmp_path, hopf_text):
        """require_colors should reject a matter loop without color."""
        path = tmp_path / "bare.scene"
        path.write_text(hopf_text.replace('color = ["1/2", "1/2"]\n', ""), "utf-8")
        assert parse_scene(path).matter.colors == (None,)
        with pytest.raises(UncoloredMatterError):
            parse_scene(path, require_colors=True)

    def test_json_round_trip(self, tmp_path, hopf_disk_scene):
        """Serialized scenes should parse back to the same canonical text."""
        text = serialize_scene(hopf_disk_scene)
        path = tmp_path / "hopf.json"
        path.write_text(text, encoding="utf-8")
        assert serialize_scene(parse_scene(path)) == text


class TestParseConnection:
    def test_shipped(self, scenes_dir):
        """The shipped connection should hold A^1_{01} = x2."""
        omega = parse_connection(scenes_dir / "abelian_disk.connection")
        x = np.array([[0.0, 0.1, 0.7, 0.2]])
        assert omega.component(1, 0, 1)(x)[0] == pytest.approx(0.7)

    def test_descending_slot_flips(self, tmp_path):
        """A descending slot should be stored ascending with the sign flipped."""
        path = tmp_path / "flip.connection"
        path.write_text("[[components]]\nslot = [1, 1, 0]\nterms = [[1.0, 0, 0, 1, 0]]\n")
        omega = parse_connection(path)
        x = np.array([[0.0, 0.0, 0.5, 0.0]])
        assert omega.component(1, 0, 1)(x)[0] == pytest.approx(-0.5)

    def test_duplicate_slot(self, tmp_path):
        """The same slot given twice should be rejected."""
        block = "[[components]]\nslot = [{}]\nterms = [[1.0, 0, 0, 0, 0]]\n"
        path = tmp_path / "dup.connection"
        path.write_text(block.format("2, 0, 3") + block.format("2, 3, 0"))
        with pytest.raises(DuplicateIdentifierError):
            parse_connection(path)


class TestApplyFlags:
    def test_overrides(self, settings):
        """Flags should override a copy of the settings only."""
        flags = CommandFlags(kappa=[2, 4, 8], grid=8, tol=1e-2, seed=5, out="elsewhere")
        local = apply_flags(settings, flags)
        assert local.KAPPA_SCHEDULE == [2.0, 4.0, 8.0]
        assert local.QUADRATURE.base_points_per_axis == 8
        assert local.QUADRATURE.rel_tol == 1e-2
        assert local.QUADRATURE.seed == 5
        assert local.OUTPUT_DIR == "elsewhere"
        assert settings.QUADRATURE.base_points_per_axis == 16

    def test_bad_schedule(self, settings):
        """A decreasing schedule should be rejected."""
        with pytest.raises(AppValidationError):
            apply_flags(settings, CommandFlags(kappa=[8, 4, 2]))


class TestRunCommand:
    def test_validate(self, scenes_dir, settings, capsys):
        """validate should report the scene as valid."""
        code = run_command("validate", scenes_dir / "hopf_disk.scene", CommandFlags(), settings)
        assert code == EXIT_OK
        assert "scene hopf_disk: valid" in capsys.readouterr().out

    def test_lk(self, scenes_dir, settings, capsys):
        """lk should print the piercing table and the total."""
        code = run_command("lk", scenes_dir / "hopf_disk.scene", CommandFlags(), settings)
        assert code == EXIT_OK
        assert "lk = -1" in capsys.readouterr().out

    def test_lk_empty_surface(self, scenes_dir, settings, capsys):
        """lk without a surface should be zero."""
        run_command("lk", scenes_dir / "empty_surface.scene", CommandFlags(), settings)
        assert "lk = 0" in capsys.readouterr().out

    def test_fhat(self, scenes_dir, settings, capsys):
        """fhat should print the coefficient and the algebra vector."""
        code = run_command("fhat", scenes_dir / "hopf_disk.scene", CommandFlags(), settings)
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "coefficient" in out
        assert "algebra" in out

    def test_classical_needs_connection(self, scenes_dir, settings):
        """classical without --connection should be rejected."""
        with pytest.raises(AppValidationError):
            run_command("classical", scenes_dir / "hopf_disk.scene", CommandFlags(), settings)

    def test_classical(self, scenes_dir, settings, capsys):
        """classical should print F_S for the given connection."""
        flags = CommandFlags(connection=str(scenes_dir / "abelian_disk.connection"))
        assert run_command("classical", scenes_dir / "hopf_disk.scene", flags, settings) == 0
        assert "F_S" in capsys.readouterr().out

    def test_converge_unconverged(self, scenes_dir, exhausted, tmp_path):
        """converge should exit with 3 and keep the failed rows in the CSV."""
        flags = CommandFlags(kappa=[5, 10, 20], out=str(tmp_path))
        code = run_command("converge", scenes_dir / "empty_surface.scene", flags, exhausted)
        assert code == EXIT_NONCONVERGENCE
        with (tmp_path / "convergence.csv").open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 3
        assert all(row["re_value"] == "" for row in rows)

    def test_unknown_command(self, scenes_dir, settings):
        """Unknown commands should be rejected."""
        with pytest.raises(AppValidationError):
            run_command("plot", scenes_dir / "hopf_disk.scene", CommandFlags(), settings)


class TestMain:
    def test_missing_file(self, tmp_path, capsys):
        """A missing scene should exit with 2 and print the error code."""
        assert main(["validate", str(tmp_path / "missing.scene")]) == 2
        assert "NOT_FOUND" in capsys.readouterr().err

    def test_bad_flag_value(self, scenes_dir, capsys):
        """A grid below the minimum should exit with 2."""
        assert main(["validate", str(scenes_dir / "hopf_disk.scene"), "--grid", "2"]) == 2

    def test_z(self, scenes_dir, capsys):
        """z should print Z and exit with 0."""
        assert main(["z", str(scenes_dir / "empty_surface.scene")]) == 0
        assert "Z = " in capsys.readouterr().out

    @pytest.mark.slow
    def test_converge_writes_csv(self, scenes_dir, tmp_path):
        """converge should write the convergence table with the fixed columns."""
        out = tmp_path / "run"
        scene = str(scenes_dir / "empty_surface.scene")
        code = main(["converge", scene, "--kappa", "5,10,20", "--out", str(out)])
        assert code in (0, 3)
        with (out / "convergence.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == 4
        assert (out / "plot_data.csv").is_file()
