"""Driving the bandit against a remote scoring endpoint.

Spins up a local HTTP server that scores (method, example) pairs from a
hidden table, then lets the bandit query it: POST {"run_id", "method",
"example"} in, {"score": value} back.  Scores are cached per pair so retried
or repeated queries never pay twice.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

import lrbandit as lb

rng = np.random.default_rng(4)
m, n = 6, 25
hidden_truth = (rng.random((m, n)) < np.linspace(0.3, 0.8, m)[:, None]).astype(float)


class Scorer(BaseHTTPRequestHandler):
    calls = 0

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        Scorer.calls += 1
        i = int(body["method"][1:])   # names are m0, m1, ...
        j = int(body["example"][1:])  # ids are x0, x1, ...
        payload = json.dumps({"score": hidden_truth[i, j]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


server = HTTPServer(("127.0.0.1", 0), Scorer)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_port}"
print(f"scoring endpoint listening at {url}")

oracle = lb.RemoteOracle(url, m, n, run_id="demo", retries=3)
budget = int(0.6 * m * n)
result = lb.run_ucb_e(oracle, lb.AlgorithmConfig(budget_total=budget, batch_size=10), 1)

best = result.prediction.best_index
print(f"\nbandit spent {budget} evaluations ({Scorer.calls} HTTP calls)")
print(f"predicted best method: {oracle.method_names[best]} "
      f"(estimated mean {result.prediction.estimated_means[best]:.3f})")
print(f"true best method:      m{int(np.argmax(hidden_truth.mean(axis=1)))} "
      f"(true mean {hidden_truth.mean(axis=1).max():.3f})")

oracle.query(best, 0)
print(f"re-querying an evaluated pair hits the cache: still {Scorer.calls} HTTP calls")
server.shutdown()
