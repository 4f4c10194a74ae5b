"""
The ``dropcurve`` entry point: management commands under their hyphenated
names, with the run ledger migrated before dispatch.
"""

import os
import sys

ALIASES = {
    'verify-curriculum': 'verify_curriculum',
}


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dropcurve.settings')

    import django
    from django.core.management import call_command, execute_from_command_line

    django.setup()
    if len(argv) > 1:
        argv[1] = ALIASES.get(argv[1], argv[1])
        call_command('migrate', verbosity=0, interactive=False)
    argv[0] = 'dropcurve'
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
