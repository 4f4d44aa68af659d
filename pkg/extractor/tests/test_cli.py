import pytest

from embextract.cli import build_parser, main


def test_parser_defaults():
    args = build_parser().parse_args(["--images", "tree", "--out", "x.emb1"])
    assert args.backbone == "facebook/dinov3-vitb16-pretrain-lvd1689m"
    assert args.batch_size == 16
    assert args.split_tag == "train"
    assert args.device == "cpu"


def test_missing_required_args_exit_2():
    with pytest.raises(SystemExit) as exc_info:
        build_parser().parse_args(["--images", "tree"])
    assert exc_info.value.code == 2


def test_unobtainable_backbone_is_fatal(tmp_path, capsys):
    rc = main([
        "--images", str(tmp_path), "--out", str(tmp_path / "x.emb1"),
        "--backbone", str(tmp_path / "no-such-model"),
    ])
    assert rc == 1
    assert "cannot obtain backbone weights" in capsys.readouterr().err
