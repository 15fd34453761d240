"""
database.py

Implements a SQLite ledger of command invocations (run history).
"""

import json
import logging
import os
import sqlite3
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

DB_FILENAME = "aas_lab_runs.db"


class RunDatabase:
    """
    A class that handles interactions with the run history database.

    The ledger is bookkeeping only; nothing read from it feeds back into a
    computation except load_run_config, which returns a stored config verbatim.
    """

    def __init__(self, db_file=None):
        """Initialize the database connection.

                Args:
                    db_file: Path to the SQLite database file. Defaults to
                        aas_lab_runs.db in the working directory.
        """
        if db_file is None:
            db_file = os.path.join(os.getcwd(), DB_FILENAME)
        self.db_file = db_file
        self.conn = None
        self.connect()
        self.create_table()

    def connect(self):
        """
        Establish a connection to the database.
        """
        try:
            self.conn = sqlite3.connect(self.db_file)
            logger.debug("Database connection established: %s", self.db_file)
        except sqlite3.Error as e:
            logger.error("Error connecting to the database %s: %s", self.db_file, e)

    def create_table(self):
        """Create the run history table if needed."""
        if self.conn is None:
            return
        try:
            cursor = self.conn.cursor()
            cursor.execute('''CREATE TABLE IF NOT EXISTS run_history (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                command TEXT,
                config TEXT,
                master_seed TEXT,
                output_path TEXT,
                status TEXT
            );''')
            self.conn.commit()
        except sqlite3.Error as e:
            logger.error("Error creating tables: %s", e)

    def log_run(self, command: str, config: Dict[str, Any], master_seed: Optional[int],
                output_path: str, status: str) -> Optional[int]:
        """
        Log a command invocation to the database.

        Args:
            command (str): Subcommand name.
            config (Dict[str, Any]): The effective configuration.
            master_seed (int, optional): Seed of the run, if it draws phases.
            output_path (str): Primary artifact written.
            status (str): 'ok' or the failure class.

        Returns:
            int or None: The new run id, None if the insert failed.
        """
        try:
            cursor = self.conn.cursor()
            cursor.execute('''
                INSERT INTO run_history (command, config, master_seed, output_path, status)
                VALUES (?, ?, ?, ?, ?);
            ''', (command, json.dumps(config, sort_keys=True),
                  None if master_seed is None else str(master_seed), output_path, status))
            self.conn.commit()
            return cursor.lastrowid
        except (sqlite3.Error, AttributeError) as e:
            logger.error("Error inserting run entry: %s", e)
            return None

    def close(self):
        """
        Close the database connection.
        """
        if self.conn:
            self.conn.close()
            self.conn = None

    def get_runs_with_dates(self) -> List[Dict[str, Any]]:
        """
        Get every logged run, oldest first.

        Returns:
            List[Dict[str, Any]]: id, date, command, master_seed, output_path, status.
        """
        try:
            cursor = self.conn.cursor()
            cursor.execute("SELECT id, timestamp, command, master_seed, output_path, status "
                           "FROM run_history ORDER BY id")
            rows = cursor.fetchall()
        except (sqlite3.Error, AttributeError) as e:
            logger.error("Error fetching runs: %s", e)
            return []
        return [
            {
                "id": row[0],
                "date": row[1],
                "command": row[2],
                "master_seed": None if row[3] is None else int(row[3]),
                "output_path": row[4],
                "status": row[5],
            }
            for row in rows
        ]

    def load_run_config(self, run_id: int) -> Optional[Dict[str, Any]]:
        try:
            cursor = self.conn.cursor()
            cursor.execute("SELECT config FROM run_history WHERE id = ?", (run_id,))
            row = cursor.fetchone()
        except (sqlite3.Error, AttributeError) as e:
            logger.error("Error loading run %s: %s", run_id, e)
            return None
        if row is None:
            logger.info("No run found with id %s", run_id)
            return None
        return json.loads(row[0])

    def get_last_run_id(self) -> int:
        """
        Get the id of the most recent run.

        Returns:
            int: The last run id or 0 if the ledger is empty.
        """
        try:
            cursor = self.conn.cursor()
            cursor.execute("SELECT id FROM run_history ORDER BY id DESC LIMIT 1")
            row = cursor.fetchone()
        except (sqlite3.Error, AttributeError) as e:
            logger.error("Error fetching the last run: %s", e)
            return 0
        return row[0] if row else 0

    def run_exists(self, run_id: int) -> bool:
        """
        Check if a run with the given id exists in the database.

        Args:
            run_id (int): The run id.

        Returns:
            bool: True if the run exists, False otherwise.
        """
        try:
            cursor = self.conn.cursor()
            cursor.execute("SELECT COUNT(*) FROM run_history WHERE id = ?", (run_id,))
            row = cursor.fetchone()
            return row[0] > 0
        except (sqlite3.Error, AttributeError) as e:
            logger.error("Error checking if run exists: %s", e)
            return False
