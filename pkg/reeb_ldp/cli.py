"""``reeb-ldp`` console entry point: the app's management commands without manage.py."""

import os
import sys

SUBCOMMANDS = ('analyze', 'graph', 'coeffs', 'simulate', 'action', 'ldp', 'oracle')


def run(argv):
    """Run one subcommand and return its exit code."""
    from django.core.management import ManagementUtility

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'reeb_ldp_project.settings')
    argv = list(argv)
    if not argv or argv[0] not in SUBCOMMANDS + ('help', '--help', '-h'):
        sys.stderr.write(f"usage: reeb-ldp {{{','.join(SUBCOMMANDS)}}} [options]\n")
        return 2
    if argv[0] in ('--help', '-h'):
        argv = ['help']
    try:
        ManagementUtility(['reeb-ldp', *argv]).execute()
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else (0 if code is None else 1)
    return 0


def main():
    sys.exit(run(sys.argv[1:]))
