# Controllers package: one handler per CLI subcommand
