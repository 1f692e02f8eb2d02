'''Tables and files written by the command line tool.

Every CSV starts with one comment line naming the manifest it belongs to:

    # manifest: manifest.json sha256=<digest of the manifest text>

followed by a header row and the data. Read them back with
`pd.read_csv(path, comment='#')`.

Front tables have the columns v1_seconds, v2_joules, then S_k, H_k, fE_k,
B_k for k = 1..K. Trace tables use moea.population.TRACE_COLUMNS.
'''
import hashlib
import json
import logging
import typing as t
from pathlib import Path

import attr
import pandas as pd

from .cost import ObjectiveValue, SplitPlan
from .moea.pareto import ParetoFront

log = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


@attr.s(auto_attribs=True, frozen=True)
class RunManifest:
    command: str
    scenario: t.Optional[str]
    scenario_sha256: t.Optional[str]
    algo: t.Optional[str]
    seeds: t.Tuple[int, ...]
    generations: t.Optional[int]
    out: str
    version: str
    options: t.Dict[str, t.Any] = attr.Factory(dict)

    def to_json(self) -> str:
        doc = attr.asdict(self)
        doc['seeds'] = list(self.seeds)
        return json.dumps(doc, indent=2, sort_keys=True) + '\n'

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def load(cls, path: t.Union[str, Path]) -> 'RunManifest':
        doc = json.loads(Path(path).read_text())
        doc['seeds'] = tuple(doc['seeds'])
        return cls(**doc)


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(manifest.to_json())
    log.info('wrote %s', path)
    return path


def write_csv(path: Path, df: pd.DataFrame, manifest: RunManifest) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as fh:
        fh.write(f'# manifest: {MANIFEST_NAME} sha256={manifest.digest}\n')
        df.to_csv(fh, index=False, lineterminator='\n')
    log.info('wrote %s (%d rows)', path, len(df))
    return path


def plan_row(objective: t.Iterable[float], plan: SplitPlan
             ) -> t.Dict[str, t.Any]:
    v1, v2 = objective
    return dict(v1_seconds=float(v1), v2_joules=float(v2), **plan.flat())


def front_frame(front: ParetoFront) -> pd.DataFrame:
    if not front.payloads:
        return pd.DataFrame(front.points, columns=['v1_seconds', 'v2_joules'])
    return pd.DataFrame([plan_row(p, plan) for p, plan
                         in zip(front.points, front.payloads)])


def baseline_frame(point: ObjectiveValue, plan: SplitPlan) -> pd.DataFrame:
    return pd.DataFrame([plan_row(point, plan)])


def tagged(df: pd.DataFrame, **columns) -> pd.DataFrame:
    '''`df` with constant leading columns, for long-format tables.'''
    df = df.copy()
    for i, (name, value) in enumerate(columns.items()):
        df.insert(i, name, value)
    return df
