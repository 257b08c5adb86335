from apiembed.cli import main

main()
