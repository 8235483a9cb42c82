"""HTTP service wrapping the pipeline; the CLI talks to it in-process or over the network."""
