"""
File handling utilities for runs, manifests and tabular reports
"""

import hashlib
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)


class FileHandler:
    """Handles file operations for the texture attack engine"""

    @staticmethod
    def validate_input_path(path: str, suffix: Optional[str] = None) -> bool:
        """Validate that an input file or directory exists (and has ``suffix`` if given)"""
        if not path or not os.path.exists(path):
            return False
        if os.path.isfile(path) and suffix:
            return path.lower().endswith(suffix)
        return True

    @staticmethod
    def validate_output_path(path: str) -> bool:
        """Validate if output path is writable, creating it when missing"""
        try:
            os.makedirs(path, exist_ok=True)
        except OSError:
            return False
        return os.access(path, os.W_OK)

    @staticmethod
    def create_run_directory(outdir: str, command: str, run_id: str) -> str:
        """``<outdir>/<command>/<run-id>/``"""
        path = os.path.join(outdir, command, run_id)
        os.makedirs(path, exist_ok=True)
        return path

    @staticmethod
    def write_json(path: str, payload: Any) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        return path

    @staticmethod
    def read_json(path: str) -> Any:
        with open(path, 'r', encoding='utf-8') as fh:
            return json.load(fh)

    @staticmethod
    def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fh:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True, default=_json_default) + '\n')
        return path

    @staticmethod
    def read_jsonl(path: str) -> List[Dict[str, Any]]:
        records = []
        with open(path, 'r', encoding='utf-8') as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    @staticmethod
    def save_csv(frame: pd.DataFrame, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame.to_csv(path, index=False, float_format='%.10g')
        return path

    @staticmethod
    def save_to_excel(sheets: Dict[str, pd.DataFrame], path: str) -> Optional[str]:
        """Write one sheet per frame with auto-adjusted column widths"""
        if not sheets:
            logger.warning("No data to save")
            return None

        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)

            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                for sheet_name, frame in sheets.items():
                    sheet_name = sheet_name[:31]
                    frame.to_excel(writer, index=False, sheet_name=sheet_name)
                    worksheet = writer.sheets[sheet_name]

                    for column in worksheet.columns:
                        column_letter = column[0].column_letter
                        max_length = max(len(str(cell.value)) for cell in column if cell.value is not None)
                        worksheet.column_dimensions[column_letter].width = min(max_length + 2, 50)

            logger.info(f"Report saved to: {path}")
            return path

        except (OSError, ValueError) as e:
            logger.error(f"Error saving to Excel: {str(e)}")
            return None

    @staticmethod
    def sha256_file(path: str) -> str:
        digest = hashlib.sha256()
        with open(path, 'rb') as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b''):
                digest.update(chunk)
        return digest.hexdigest()

    @staticmethod
    def relative_to(path: str, root: str) -> str:
        return os.path.relpath(path, root).replace(os.sep, '/')


def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
