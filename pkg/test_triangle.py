import json
from fractions import Fraction

import pytest

from discqueue.errors import ParameterDomainError, TriangleCacheError, TriangleIndexError
from discqueue.model import make_params
from discqueue.series import build_l_triangle, cached_l_triangle, extend_l_triangle
from discqueue.triangle import CoefficientTriangle, TriangleKind, triangle_from_rows


def test_entry_conventions(unit_params):
    triangle = build_l_triangle(unit_params, 3)
    assert triangle.depth == 3
    assert triangle.entry(3, 0) == Fraction(9, 2)
    assert triangle.entry(2, 3) == 0
    assert triangle.entry(2, -1) == 0
    with pytest.raises(TriangleIndexError):
        triangle.entry(4, 0)
    with pytest.raises(TriangleIndexError):
        triangle.row(-1)
    assert triangle.column(1) == [1, Fraction(5, 2), Fraction(27, 4)]


def test_b_sequence(unit_params):
    triangle = build_l_triangle(unit_params, 2)
    assert triangle.b == (1, Fraction(3, 2), Fraction(7, 3), Fraction(13, 4))
    m_triangle = triangle_from_rows(TriangleKind.M, [[1], [1, 1]])
    with pytest.raises(TriangleIndexError):
        m_triangle.b


def test_truncated(unit_params):
    triangle = build_l_triangle(unit_params, 10)
    assert triangle.truncated(4) == build_l_triangle(unit_params, 4)
    with pytest.raises(TriangleIndexError):
        triangle.truncated(11)


def test_dict_record_is_revalidated():
    triangle = build_l_triangle(make_params(2, 1), 6)
    record = json.loads(json.dumps(triangle.to_dict()))
    assert record["alpha_sq"] == "1/2"
    assert record["rows"][0] == ["1"]
    assert CoefficientTriangle.from_dict(record) == triangle


@pytest.mark.parametrize("corrupt", [
    lambda r: r["rows"][2].__setitem__(2, "2"),
    lambda r: r["rows"][2].__setitem__(0, "-1"),
    lambda r: r["rows"][2].append("1"),
    lambda r: r["rows"].pop(),
    lambda r: r.pop("alpha_sq"),
    lambda r: r["rows"][1].__setitem__(0, "x"),
])
def test_dict_record_rejects_corruption(unit_params, corrupt):
    record = build_l_triangle(unit_params, 4).to_dict()
    corrupt(record)
    with pytest.raises(TriangleCacheError):
        CoefficientTriangle.from_dict(record)


def test_m_record_must_be_integral():
    record = {"kind": "M", "depth": 1, "rows": [["1"], ["1/2", "1"]]}
    with pytest.raises(TriangleCacheError):
        CoefficientTriangle.from_dict(record)


def test_cache_reuses_deepest(unit_params, triangle_cache):
    built = cached_l_triangle(unit_params, 12, triangle_cache)
    assert triangle_cache.path_for(built).exists()

    shallow = cached_l_triangle(unit_params, 5, triangle_cache)
    assert shallow == built.truncated(5)
    assert len(list(triangle_cache.cache_dir.glob("L_*.json"))) == 1

    deeper = cached_l_triangle(unit_params, 20, triangle_cache)
    assert deeper == build_l_triangle(unit_params, 20)
    assert triangle_cache.deepest(TriangleKind.L, unit_params.alpha_sq).depth == 20


def test_cache_separates_alpha(triangle_cache):
    cached_l_triangle(make_params(1, 1), 5, triangle_cache)
    assert triangle_cache.deepest(TriangleKind.L, Fraction(2)) is None


def test_cache_ignores_invalid_files(unit_params, triangle_cache):
    triangle = cached_l_triangle(unit_params, 5, triangle_cache)
    path = triangle_cache.path_for(triangle)
    path.write_text("{not json", encoding="utf-8")
    assert triangle_cache.deepest(TriangleKind.L, unit_params.alpha_sq) is None
    with pytest.raises(TriangleCacheError):
        triangle_cache.load_file(path)


def test_cache_checks_alpha_on_load(unit_params, triangle_cache):
    path = triangle_cache.save(build_l_triangle(unit_params, 3))
    with pytest.raises(TriangleCacheError):
        triangle_cache.load_file(path, Fraction(1, 2))


def test_cache_clear(unit_params, triangle_cache):
    cached_l_triangle(unit_params, 3, triangle_cache)
    triangle_cache.clear()
    assert not list(triangle_cache.cache_dir.glob("*.json"))


def test_extending_foreign_triangle_fails(unit_params):
    with pytest.raises(ParameterDomainError):
        extend_l_triangle(build_l_triangle(make_params(1, 2), 3), unit_params, 6)
