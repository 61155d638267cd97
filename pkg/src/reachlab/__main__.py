from reachlab.cli import main

main()
