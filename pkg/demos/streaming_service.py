"""The streaming-ML service over its line protocol, both mounts.

Drives the same request script through the in-process mount and a local
TCP socket and shows the responses are identical, line for line.
"""

import threading

from convergesim import mlserve

SCRIPT = [
    "create name=walltime type=linear_sgd",
    "train name=walltime x:x=2.0 x:y=2.0 x:z=2.0 y=4.65",
    "train name=walltime x:x=8.0 x:y=8.0 x:z=8.0 y=23.76",
    "train name=walltime x:x=4.0 x:y=2.0 x:z=1.0 y=4.64",
    "predict name=walltime x:x=6.0 x:y=3.0 x:z=2.0",
    "record_truth name=walltime y_true=5.71 y_pred=5.4",
    "record_truth name=walltime y_true=9.03 y_pred=8.1",
    "metrics name=walltime",
    "stats name=walltime",
    "list_models",
]

in_process = mlserve.MLService()
expected = [mlserve.handle_line(in_process, line) for line in SCRIPT]

server = mlserve.serve_tcp("127.0.0.1", 0)
host, port = server.server_address
threading.Thread(target=server.serve_forever, daemon=True).start()
client = mlserve.ServiceClient(host, port)

print(f"socket mount on {host}:{port}\n")
all_match = True
for line, want in zip(SCRIPT, expected):
    got = client.call_line(line)
    all_match &= got == want
    print(f"> {line}")
    print(f"< {got}")

client.close()
server.shutdown()
server.server_close()
print(f"\nin-process and socket responses identical: {all_match}")
