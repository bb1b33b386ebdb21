import xml.etree.ElementTree as ET

from seqclusfd.depth import build_fboxplot
from seqclusfd.generators import gen_toy
from seqclusfd.plotting import boxplot_svg, feature_panels_svg
from seqclusfd.smoothing import SmoothingConfig, prepare_features

NS = "{http://www.w3.org/2000/svg}"


def _tags(svg):
    root = ET.fromstring(svg)
    return root, [el.tag for el in root.iter()]


def test_feature_panels(tmp_path):
    cs = gen_toy(seed=0)
    st = prepare_features(cs, SmoothingConfig(error_free=True))
    path = tmp_path / "f.svg"
    svg = feature_panels_svg(st, cs.labels, path, title="toy")
    assert path.read_text() == svg
    root, tags = _tags(svg)
    assert tags.count(NS + "polyline") == 3 * cs.n
    texts = [el.text for el in root.iter(NS + "text")]
    assert "toy" in texts and {"1", "2", "3"} <= set(texts)


def test_boxplot_panels_skip_missing():
    cs = gen_toy(seed=1)
    lab = list(cs.labels)
    a = cs.subset([i for i, g in enumerate(lab) if g == "1"])
    b = cs.subset([i for i, g in enumerate(lab) if g == "2"])
    svg = boxplot_svg([build_fboxplot(a), None, build_fboxplot(b)], names=["x", "y", "z"])
    root, tags = _tags(svg)
    assert tags.count(NS + "polygon") >= 4
    texts = [el.text for el in root.iter(NS + "text")]
    assert "x" in texts and "z" in texts and "y" not in texts
