import csv
import json
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import yaml


def get_project_root_path() -> Path:
    path = Path(os.path.dirname(__file__))
    return path.parent.parent


def load_config(config_location: Optional[str] = None) -> Dict:
    """
    Reads a run configuration. YAML is a superset of JSON, so both formats load here.
    :param config_location: path of the file; defaults to config.yml at the project root.
    :return: the parsed mapping, empty when the file is empty.
    """
    if config_location is None:
        config_location = os.path.join(get_project_root_path(), 'config.yml')

    with open(config_location) as file:
        return yaml.safe_load(file) or {}


def save_json(file_name, data):
    with open(file_name, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def load_json(file_name):
    with open(file_name) as f:
        data = json.load(f)
        return data


def save_csv(file_name, header: List[str], rows: Iterable[Dict]):
    with open(file_name, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=header, extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
