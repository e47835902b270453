"""
Run ledger
Optional record of every CLI invocation in a SQL database (RELZK_LEDGER_URL).
"""

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional

from sqlalchemy import DateTime, Integer, String, Text, create_engine, select
from sqlalchemy.orm import DeclarativeBase, Mapped, Session, mapped_column

from relzk.config import get_settings

logger = logging.getLogger(__name__)


class Base(DeclarativeBase):
    pass


class Run(Base):
    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    subcommand: Mapped[str] = mapped_column(String(32), index=True)
    seed: Mapped[str] = mapped_column(String(20))
    params: Mapped[str] = mapped_column(Text, default="{}")
    status: Mapped[str] = mapped_column(String(16), default="running")
    exit_code: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    summary: Mapped[str] = mapped_column(Text, default="")
    started_at: Mapped[datetime] = mapped_column(DateTime, index=True)
    finished_at: Mapped[Optional[datetime]] = mapped_column(DateTime, nullable=True)


@dataclass
class RunSummary:
    id: int
    subcommand: str
    seed: str
    status: str
    exit_code: Optional[int]
    started_at: datetime
    finished_at: Optional[datetime]
    summary: str

    def to_line(self) -> str:
        finished = self.finished_at.isoformat(timespec="seconds") if self.finished_at else "-"
        return (
            f"{self.id}\t{self.subcommand}\tseed={self.seed}\t{self.status}\texit={self.exit_code}"
            f"\t{self.started_at.isoformat(timespec='seconds')}\t{finished}\t{self.summary}"
        )


class RunLedger:
    """Database operations for the runs table"""

    def __init__(self, url: str):
        self.engine = create_engine(url)
        Base.metadata.create_all(self.engine)
        logger.debug(f"Run ledger ready at {self.engine.url!r}")

    def create_run(self, subcommand: str, seed: int, params: Dict[str, Any]) -> int:
        with Session(self.engine) as session:
            run = Run(
                subcommand=subcommand,
                seed=str(seed),
                params=json.dumps(params, sort_keys=True, default=str),
                started_at=datetime.now(),
            )
            session.add(run)
            session.commit()
            return run.id

    def finish_run(self, run_id: int, status: str, exit_code: int, summary: str = "") -> None:
        with Session(self.engine) as session:
            run = session.get(Run, run_id)
            if run is None:
                logger.warning(f"Run {run_id} missing from ledger")
                return
            run.status = status
            run.exit_code = exit_code
            run.summary = summary
            run.finished_at = datetime.now()
            session.commit()

    def recent_runs(self, limit: int = 20) -> List[RunSummary]:
        with Session(self.engine) as session:
            rows = session.scalars(select(Run).order_by(Run.id.desc()).limit(limit)).all()
            return [
                RunSummary(r.id, r.subcommand, r.seed, r.status, r.exit_code, r.started_at, r.finished_at, r.summary)
                for r in rows
            ]


def open_ledger(url: Optional[str] = None) -> Optional[RunLedger]:
    """Ledger for the configured URL, or None when recording is off"""
    url = url or get_settings().ledger_url
    if not url:
        return None
    try:
        return RunLedger(url)
    except Exception as e:
        logger.error(f"Run ledger unavailable at {url}: {e}")
        return None
