"""Tests for the binary and text snapshot formats."""

import pytest

from app.services.snapshot import (
    HEADER,
    SnapshotFormatError,
    decode,
    encode,
    from_text,
    read_state,
    to_text,
    write_state,
)
from app.services.spectral_core import FourierField


class TestBinary:
    def test_round_trip_is_exact(self, small_sample):
        f = small_sample.u
        assert decode(encode(f)) == f

    def test_header_layout(self):
        data = encode(FourierField.constant(3, 1.5, cutoff=1))
        magic, dim, cutoff, count = HEADER.unpack_from(data)
        assert (magic, dim, cutoff, count) == (b"SPWV1", 3, 1, 13)
        assert len(data) == HEADER.size + 8 * 27

    def test_bad_magic(self):
        data = bytearray(encode(FourierField.zeros(1, 1)))
        data[:5] = b"XXXXX"
        with pytest.raises(SnapshotFormatError, match="bad magic"):
            decode(bytes(data))

    def test_truncated_payload(self):
        data = encode(FourierField.zeros(2, 2))
        with pytest.raises(SnapshotFormatError, match="payload"):
            decode(data[:-8])

    def test_short_header(self):
        with pytest.raises(SnapshotFormatError):
            decode(b"SPWV")

    def test_state_files(self, tmp_path, small_sample):
        u_path, ut_path = write_state(tmp_path / "snap", "final", small_sample)
        assert u_path.name == "final_u.spwv"
        assert ut_path.name == "final_ut.spwv"
        assert read_state(tmp_path / "snap", "final") == small_sample


class TestText:
    def test_round_trip_is_exact(self, small_sample):
        f = small_sample.ut
        assert from_text(to_text(f)) == f

    def test_layout(self):
        f = FourierField.from_modes(1, 2, {(1,): (0.5, -0.25)}, mean=3.0)
        lines = to_text(f).splitlines()
        assert lines == ["SPWV1 1 2 2", "mean 3.0", "1 0.5 -0.25", "2 0.0 0.0"]

    def test_count_mismatch(self):
        with pytest.raises(SnapshotFormatError, match="declares"):
            from_text("SPWV1 1 1 2\nmean 0.0\n1 0.0 0.0\n")

    def test_missing_mean_line(self):
        with pytest.raises(SnapshotFormatError, match="mean"):
            from_text("SPWV1 1 1 1\n1 0.0 0.0\n2 0.0 0.0\n")
