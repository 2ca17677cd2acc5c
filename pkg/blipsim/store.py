from datetime import datetime, timezone

import csv
import io
import json
import os
import tempfile

SUMMARY_HEADER = ["n", "replicas", "mean", "se", "median", "exceedance", "ref_value"]

MANIFEST = "manifest.json"
RECORDS = "records.jsonl"
SUMMARY = "summary.csv"


class StoreError(Exception):
    pass


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _now():
    return datetime.now(timezone.utc).isoformat()


class RunStore(object):
    """One directory per run holding the manifest and the result files.

    Every file is written to a temporary file in the run directory first and
    moved into place, so a reader never sees a half-written file.
    """

    def __init__(self, run_dir):
        self.run_dir = run_dir
        self._manifest = None
        self._records = []

    def path(self, name):
        return os.path.join(self.run_dir, name)

    def _rewrite_file(self, name, content):
        """Atomically replace a file of the run directory.

        :name: File name relative to the run directory
        :content: Text content
        :returns: Nothing
        :raises: StoreError in case of error
        """

        try:
            tmp_fd, tmp_path = tempfile.mkstemp(prefix=".blipsim_tmp_", dir=self.run_dir)
            with os.fdopen(tmp_fd, "w", newline="") as f:
                f.write(content)
            os.replace(tmp_path, self.path(name))
        except OSError as e:
            raise StoreError(f'Failed to write "{self.path(name)}": {e}.')

    def open(self, subcommand, config, version):
        """Create the run directory and write the initial manifest.

        :subcommand: Name of the subcommand being run
        :config: Resolved configuration
        :version: Version of the package
        :returns: Nothing
        :raises: StoreError in case of error
        """

        try:
            os.makedirs(self.run_dir, exist_ok=True)
        except OSError as e:
            raise StoreError(f'Failed to create the run directory "{self.run_dir}": {e}.')

        self._manifest = {
            "subcommand": subcommand,
            "config": config,
            "version": version,
            "started": _now(),
            "finished": None,
            "status": "running",
            "outputs": [],
        }
        self._write_manifest()

    def _write_manifest(self):
        self._rewrite_file(MANIFEST, json.dumps(self._manifest, indent=2, sort_keys=True, default=str) + "\n")

    def _register(self, name):
        if self._manifest is None:
            raise StoreError("The manifest must be written before any result.")
        if name not in self._manifest["outputs"]:
            self._manifest["outputs"].append(name)

    def add_record(self, record):
        """Queue one JSON Lines record, tagged with its manifest; written by flush_records.

        :returns: Nothing
        """

        self._records.append(dict(record, manifest=MANIFEST))

    def flush_records(self):
        """Write the queued records to records.jsonl.

        :returns: Nothing
        :raises: StoreError in case of error
        """

        self._register(RECORDS)
        lines = [json.dumps(r, sort_keys=True, default=str) + "\n" for r in self._records]
        self._rewrite_file(RECORDS, "".join(lines))

    def write_summary(self, summaries):
        """Write summary.csv, one row per ladder size.

        :summaries: List of SampleSummary
        :returns: Nothing
        :raises: StoreError in case of error
        """

        self._register(SUMMARY)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for s in summaries:
            writer.writerow([_format(v) for v in (s.n, s.replicas, s.mean, s.se, s.median, s.exceedance, s.ref_value)])
        self._rewrite_file(SUMMARY, buffer.getvalue())

    def write_text(self, name, writer):
        """Write an extra result file through a writer function.

        :name: File name relative to the run directory
        :writer: Callable taking a text file object
        :returns: Nothing
        :raises: StoreError in case of error
        """

        self._register(name)
        buffer = io.StringIO()
        writer(buffer)
        self._rewrite_file(name, buffer.getvalue())

    def close(self, status, extra=None):
        """Rewrite the manifest with the end timestamp and the final status.

        :status: "ok", "failed" or "interrupted"
        :extra: Dict merged into the manifest
        :returns: Nothing
        :raises: StoreError in case of error
        """

        if self._manifest is None:
            return

        self._manifest["finished"] = _now()
        self._manifest["status"] = status
        if extra:
            self._manifest.update(extra)
        self._write_manifest()
