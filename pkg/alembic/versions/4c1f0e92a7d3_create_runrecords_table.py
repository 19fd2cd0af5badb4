"""create runrecords table

Revision ID: 4c1f0e92a7d3
Revises: 
Create Date: 2026-10-18 10:12:41.503127

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa
from sqlalchemy.sql import func


# revision identifiers, used by Alembic.
revision: str = '4c1f0e92a7d3'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    op.create_table(
        'runrecords',
        sa.Column('id', sa.Integer, primary_key=True),
        sa.Column('command', sa.String(20), nullable=False),
        sa.Column('input_hash', sa.String(64), nullable=False),
        sa.Column('flags', sa.Text, nullable=True),
        sa.Column('specshift_version', sa.String(20), nullable=False),
        sa.Column('wall_time', sa.Float, nullable=True),
        sa.Column('status', sa.String(20), nullable=False),
        sa.Column('run_date', sa.DateTime(timezone=True), nullable=True, server_default=func.now()),
    )


def downgrade() -> None:
    op.drop_table('runrecords')
