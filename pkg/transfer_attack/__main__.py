"""Allow running as: python -m transfer_attack"""
from .cli import main

main()
