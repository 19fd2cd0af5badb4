"""
Run records: the JSON summary written next to every output, and an optional
SQL ledger of past runs whose schema is managed with alembic.
"""

import json
import logging
import os

from dataclasses import asdict, dataclass, field

import pandas as pd
import sqlalchemy as sa
from sqlalchemy.sql import func

from specshift import __version__
from specshift.data_management import write_atomic

logger = logging.getLogger(__name__)

LEDGER_ENV = 'SPECSHIFT_LEDGER_URL'

metadata = sa.MetaData()

runrecords = sa.Table(
    'runrecords',
    metadata,
    sa.Column('id', sa.Integer, primary_key=True),
    sa.Column('command', sa.String(20), nullable=False),
    sa.Column('input_hash', sa.String(64), nullable=False),
    sa.Column('flags', sa.Text, nullable=True),
    sa.Column('specshift_version', sa.String(20), nullable=False),
    sa.Column('wall_time', sa.Float, nullable=True),
    sa.Column('status', sa.String(20), nullable=False),
    sa.Column('run_date', sa.DateTime(timezone=True), nullable=True, server_default=func.now()),
)


@dataclass
class RunRecord:
    """What was run, on which input, and what came out."""
    command: str
    input_hash: str
    flags: dict = field(default_factory=dict)
    payload: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    status: str = 'ok'
    version: str = __version__
    wall_time: float = None

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str):
        write_atomic(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n')


def ledger_url(explicit: str = None) -> str:
    """`explicit` if given, else the SPECSHIFT_LEDGER_URL environment variable (None when unset)."""
    return explicit or os.environ.get(LEDGER_ENV) or None


class RunLedger:
    """
    Append-only table of runs.

    The table is created on first use, so a fresh sqlite file works without
    running the migrations.
    """

    def __init__(self, url: str):
        self.url = url
        self.engine = sa.create_engine(url)
        metadata.create_all(self.engine, tables=[runrecords])

    def add(self, record: RunRecord) -> int:
        with self.engine.begin() as connection:
            result = connection.execute(runrecords.insert().values(
                command=record.command,
                input_hash=record.input_hash,
                flags=json.dumps(record.flags, sort_keys=True),
                specshift_version=record.version,
                wall_time=record.wall_time,
                status=record.status))
            run_id = int(result.inserted_primary_key[0])
        logger.debug(f'Run {run_id} recorded in {self.url}')
        return run_id

    def list_runs(self, command: str = None) -> pd.DataFrame:
        query = sa.select(runrecords).order_by(runrecords.c.id)
        if command:
            query = query.where(runrecords.c.command == command)
        with self.engine.connect() as connection:
            return pd.read_sql(query, connection)
