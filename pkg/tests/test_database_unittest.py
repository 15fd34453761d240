import os
import unittest

from aas_lab.database import DB_FILENAME, RunDatabase


class RunDatabaseTestCase(unittest.TestCase):

    def setUp(self):
        # Create a temporary in-memory database for testing
        self.db = RunDatabase(db_file=':memory:')
        self.config = {'sizes': [13, 21], 'h_values': [0.01], 'master_seed': 7}

    def tearDown(self):
        # Close the database connection
        self.db.close()

    def test_log_run(self):
        run_id = self.db.log_run('sweep', self.config, 7, 'runs/sweep.csv', 'ok')

        cursor = self.db.conn.cursor()
        cursor.execute("SELECT * FROM run_history")
        row = cursor.fetchone()

        self.assertEqual(run_id, 1)
        self.assertIsNotNone(row)
        self.assertEqual(row[2], 'sweep')
        self.assertEqual(row[3], '{"h_values": [0.01], "master_seed": 7, "sizes": [13, 21]}')
        self.assertEqual(row[4], '7')
        self.assertEqual(row[5], 'runs/sweep.csv')
        self.assertEqual(row[6], 'ok')

    def test_seed_keeps_full_precision(self):
        seed = 2 ** 64 - 1
        self.db.log_run('qfi', {}, seed, 'qfi.csv', 'ok')

        runs = self.db.get_runs_with_dates()

        self.assertEqual(runs[0]['master_seed'], seed)

    def test_run_without_seed(self):
        self.db.log_run('collapse', {'input': 'sweep.csv'}, None, 'collapse.json', 'CollapseError')

        runs = self.db.get_runs_with_dates()

        self.assertIsNone(runs[0]['master_seed'])
        self.assertEqual(runs[0]['status'], 'CollapseError')

    def test_get_runs_with_dates(self):
        self.db.log_run('sweep', self.config, 7, 'sweep.csv', 'ok')
        self.db.log_run('collapse', {'input': 'sweep.csv'}, None, 'collapse.json', 'ok')

        runs = self.db.get_runs_with_dates()

        self.assertEqual([run['command'] for run in runs], ['sweep', 'collapse'])
        self.assertEqual([run['id'] for run in runs], [1, 2])
        self.assertTrue(all(run['date'] for run in runs))

    def test_load_run_config(self):
        run_id = self.db.log_run('sweep', self.config, 7, 'sweep.csv', 'ok')

        self.assertEqual(self.db.load_run_config(run_id), self.config)
        self.assertIsNone(self.db.load_run_config(99))

    def test_get_last_run_id(self):
        self.assertEqual(self.db.get_last_run_id(), 0)

        self.db.log_run('sweep', self.config, 7, 'sweep.csv', 'ok')
        self.db.log_run('fit', {'input': 'sweep.csv'}, None, 'fit.json', 'ok')

        self.assertEqual(self.db.get_last_run_id(), 2)

    def test_run_exists(self):
        self.db.log_run('sweep', self.config, 7, 'sweep.csv', 'ok')

        self.assertTrue(self.db.run_exists(1))
        self.assertFalse(self.db.run_exists(2))

    def test_closed_connection_is_reported_not_raised(self):
        self.db.close()

        with self.assertLogs('aas_lab.database', level='ERROR'):
            self.assertIsNone(self.db.log_run('sweep', {}, 0, 'sweep.csv', 'ok'))
        self.assertEqual(self.db.get_runs_with_dates(), [])
        self.assertFalse(self.db.run_exists(1))


def test_default_location_is_working_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    db = RunDatabase()
    db.log_run('wavefunction', {'L': 13}, None, 'wavefunction.csv', 'ok')
    db.close()

    assert os.path.exists(tmp_path / DB_FILENAME)
    assert RunDatabase(str(tmp_path / DB_FILENAME)).get_last_run_id() == 1


if __name__ == '__main__':
    unittest.main()
