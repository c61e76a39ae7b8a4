"""
The ``lsrpca`` console script: Django's command dispatcher under its own name.
"""
import os
import sys


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.local")

    from django.core.management import ManagementUtility  # noqa: PLC0415

    utility = ManagementUtility(["lsrpca", *sys.argv[1:]])
    utility.execute()


if __name__ == "__main__":
    main()
