"""Built-in check suites, one module per CLI subcommand."""
