"""Tests for validators."""

import os
import tempfile
from pathlib import Path

from utils.validators import validate_csv_file, validate_manifest_file, validate_output_directory


class TestValidateCSVFile:
    """Tests for CSV file validation."""

    def test_nonexistent_file(self):
        """Test validation of non-existent file."""
        is_valid, error_msg = validate_csv_file("nonexistent.csv")
        assert not is_valid
        assert "does not exist" in error_msg

    def test_wrong_suffix(self):
        """Test validation of a file that is not a CSV."""
        with tempfile.NamedTemporaryFile(suffix='.pdf', delete=False) as f:
            f.write(b"1,2,3")
            temp_path = f.name

        try:
            is_valid, error_msg = validate_csv_file(temp_path)
            assert not is_valid
            assert "not a CSV" in error_msg
        finally:
            os.unlink(temp_path)

    def test_empty_file(self):
        """Test validation of empty file."""
        with tempfile.NamedTemporaryFile(suffix='.csv', delete=False) as f:
            temp_path = f.name

        try:
            is_valid, error_msg = validate_csv_file(temp_path)
            assert not is_valid
            assert "empty" in error_msg
        finally:
            os.unlink(temp_path)

    def test_directory(self):
        """Test validation when the path is a directory."""
        with tempfile.TemporaryDirectory() as temp_dir:
            is_valid, error_msg = validate_csv_file(temp_dir)
            assert not is_valid
            assert "not a file" in error_msg

    def test_valid_csv(self):
        """Test validation of a valid CSV file."""
        with tempfile.NamedTemporaryFile(suffix='.csv', delete=False) as f:
            f.write(b"1.0,2.0\n3.0,4.0\n")
            temp_path = f.name

        try:
            is_valid, error_msg = validate_csv_file(temp_path)
            assert is_valid
            assert error_msg is None
        finally:
            os.unlink(temp_path)


class TestValidateManifestFile:
    """Tests for SUR manifest validation."""

    def test_missing(self, tmp_path):
        is_valid, error_msg = validate_manifest_file(str(tmp_path / "system.txt"))
        assert not is_valid
        assert "does not exist" in error_msg

    def test_empty(self, tmp_path):
        path = tmp_path / "system.txt"
        path.write_text("")
        is_valid, error_msg = validate_manifest_file(str(path))
        assert not is_valid
        assert "empty" in error_msg

    def test_valid(self, tmp_path):
        path = tmp_path / "system.txt"
        path.write_text("y0.csv, x0.csv\n")
        assert validate_manifest_file(str(path)) == (True, None)


class TestValidateOutputDirectory:
    """Tests for output directory validation."""

    def test_creates_missing_directory(self):
        """Test that a missing directory is created."""
        with tempfile.TemporaryDirectory() as temp_dir:
            target = Path(temp_dir) / "nested" / "results"
            is_valid, error_msg = validate_output_directory(str(target))
            assert is_valid
            assert error_msg is None
            assert target.is_dir()

    def test_file_as_directory(self):
        """Test validation when path is a file, not directory."""
        with tempfile.NamedTemporaryFile(delete=False) as f:
            f.write(b"test")
            temp_path = f.name

        try:
            is_valid, error_msg = validate_output_directory(temp_path)
            assert not is_valid
            assert "not a directory" in error_msg
        finally:
            os.unlink(temp_path)

    def test_valid_directory(self):
        """Test validation of valid directory."""
        with tempfile.TemporaryDirectory() as temp_dir:
            is_valid, error_msg = validate_output_directory(temp_dir)
            assert is_valid
            assert error_msg is None
