from .oracle import main

main()
