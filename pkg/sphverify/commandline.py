import argparse
import logging
import sys

from . import __version__


def _resolutions(text):
    return [int(n) for n in str(text).replace(' ', '').split(',') if n]


def _add_study_arguments(parser):
    parser.add_argument(
        '--resolutions', type=_resolutions,
        help='Particles per unit length, comma separated, e.g. 50,100,200')
    parser.add_argument(
        '--steps', type=int, help='Time steps per resolution')
    parser.add_argument(
        '-n', '-np', '--nproc', type=int, help='Number of processes')
    parser.add_argument(
        '-o', '--output', help='Prefix of the report files')
    parser.add_argument(
        '--config', help='File of key=value lines with further settings')
    parser.add_argument(
        '--acceptance', action='store_true', default=None,
        help='Check the acceptance bounds and fail when one is missed')
    parser.add_argument(
        '--noprogress', action='store_true', help='Hide progress bars')


def _study_kwargs(args, **fixed):
    from .utils import read_keyvalue_file

    kwargs = read_keyvalue_file(args.config) if args.config else {}
    for key in ('resolutions', 'steps', 'nproc', 'output', 'acceptance'):
        value = getattr(args, key)
        if value is not None:
            kwargs[key] = value
    for key, value in fixed.items():
        if value is not None:
            kwargs[key] = value
    if args.noprogress:
        kwargs['progress'] = False
    return kwargs


def _verify(args):
    from .verify import ConvergenceStudy
    study = ConvergenceStudy(**_study_kwargs(
        args, kind='solid', method=args.bc, condition=args.condition,
        domain=args.domain))
    return 0 if study.run() else 1


def _verify_io(args):
    from .verify import ConvergenceStudy
    study = ConvergenceStudy(**_study_kwargs(
        args, kind='open', method=args.method, case=args.case))
    return 0 if study.run() else 1


def _layer_test(args):
    import pandas as pd
    from ._operators import layer_skip_test
    resolutions = args.resolutions or [50, 100, 200]
    frame = pd.concat([layer_skip_test([1. / n for n in resolutions], n_skip,
                                       kernel=args.kernel)
                       for n_skip in args.skip], ignore_index=True)
    frame.to_csv(args.output, index=False)
    logging.info(f"Layer test saved as {args.output}")
    return 0


def _ms_dump(args):
    from ._mms import ms_dump
    from ._scheme import SchemeConfig
    frame = ms_dump(args.id, args.grid, args.time,
                    SchemeConfig(c_o=args.c_o, nu=args.nu),
                    material=not args.local)
    frame.to_csv(args.output, index=False)
    logging.info(f"Manufactured solution {args.id} saved as {args.output}")
    return 0


def _domain_dump(args):
    from ._geometry import DomainSpec, domain_dump
    spec = DomainSpec(args.shape.replace('-', '_'), args.dx,
                      ghost_layers=args.layers, on_surface=args.on_surface)
    domain_dump(spec).to_csv(args.output, index=False)
    logging.info(f"Domain {args.shape} saved as {args.output}")
    return 0


def _report_merge(args):
    from ._report import merge_reports
    merge_reports(args.inputfilename, args.output)
    return 0


def _cylinder(args):
    from ._cylinder import CylinderCase, parse_spacing, run_cylinder
    from .utils import read_keyvalue_file

    kwargs = read_keyvalue_file(args.config) if args.config else {}
    D = kwargs.get('D', 2.)
    if args.dx is not None:
        kwargs['dx'] = args.dx
    if 'dx' in kwargs:
        kwargs['dx'] = parse_spacing(kwargs['dx'], D)
    if args.tfinal is not None:
        kwargs['t_final'] = args.tfinal
    if args.snapshot_every is not None:
        kwargs['snapshot_every'] = args.snapshot_every
    if args.no_damping:
        kwargs['delta'] = 0.
    forces = run_cylinder(CylinderCase(**kwargs), out=args.out,
                          snapshot_prefix=args.snapshot_prefix,
                          progress=not args.noprogress)
    half = forces[forces['t'] >= 0.5 * forces['t'].max()]
    logging.info(
        f"Mean c_d {half['c_d'].mean():.4f}, mean c_l {half['c_l'].mean():.4f} "
        f"over the second half; pressure range "
        f"[{forces['p_mean'].min():.2f}, {forces['p_mean'].max():.2f}]")
    return 0


def _parser():
    parser = argparse.ArgumentParser(
        description=f'sphverify {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    verify = sub.add_parser('verify', help='Convergence study of a solid wall treatment')
    verify.add_argument(
        '--bc', choices=['marrone', 'adami', 'colagrossi', 'takeda', 'randles',
                         'hashemi', 'marongiu', 'mms', 'mms2l'],
        help='Solid wall treatment')
    verify.add_argument(
        '--condition', choices=['pressure', 'slip', 'noslip'],
        help='Condition imposed on the wall')
    verify.add_argument(
        '--domain', choices=['straight', 'convex', 'concave', 'packed-convex',
                             'packed-concave'],
        help='Test domain')
    _add_study_arguments(verify)
    verify.set_defaults(func=_verify)

    verify_io = sub.add_parser('verify-io', help='Convergence study of an inlet or outlet')
    verify_io.add_argument(
        '--method', choices=['donothing', 'mirror', 'simple-mirror', 'hybrid'],
        help='Open boundary treatment')
    verify_io.add_argument(
        '--case', choices=['vel-in', 'pres-in', 'vel-wave-in', 'pres-wave-in',
                           'vel-out', 'pres-out', 'vel-wave-out', 'pres-wave-out'],
        help='Test case')
    _add_study_arguments(verify_io)
    verify_io.set_defaults(func=_verify_io)

    layer = sub.add_parser('layer-test', help='Operator errors near a truncated support')
    layer.add_argument('--resolutions', type=_resolutions,
                       help='Particles per unit length, comma separated')
    layer.add_argument('--skip', type=int, nargs='+', default=[0, 2],
                       help='Number of skipped particle layers')
    layer.add_argument('--kernel', default='wendland_c2',
                       choices=['wendland_c2', 'quintic'], help='Kernel family')
    layer.add_argument('-o', '--output', default='layer_test.csv')
    layer.set_defaults(func=_layer_test)

    ms = sub.add_parser('ms', help='Manufactured solutions').add_subparsers(
        dest='ms_command', required=True)
    ms_dump = ms.add_parser('dump', help='Write fields and source terms on a grid')
    ms_dump.add_argument('--id', required=True, help='Manufactured solution id')
    ms_dump.add_argument('--grid', type=int, default=50, help='Points per side')
    ms_dump.add_argument('--time', type=float, default=0.)
    ms_dump.add_argument('--c-o', type=float, default=20., help='Speed of sound')
    ms_dump.add_argument('--nu', type=float, default=0.01, help='Kinematic viscosity')
    ms_dump.add_argument('--local', action='store_true',
                         help='Source terms of the fixed-particle form')
    ms_dump.add_argument('-o', '--output', default='ms.csv')
    ms_dump.set_defaults(func=_ms_dump)

    domain = sub.add_parser('domain', help='Test domains').add_subparsers(
        dest='domain_command', required=True)
    domain_dump = domain.add_parser('dump', help='Write a generated domain')
    domain_dump.add_argument(
        '--shape', required=True,
        choices=['straight', 'convex', 'concave', 'packed-convex',
                 'packed-concave', 'io-channel'])
    domain_dump.add_argument('--dx', type=float, default=0.02)
    domain_dump.add_argument('--layers', type=int, default=6, help='Ghost layers')
    domain_dump.add_argument('--on-surface', action='store_true',
                             help='One boundary row on the interface')
    domain_dump.add_argument('-o', '--output', default='domain.csv')
    domain_dump.set_defaults(func=_domain_dump)

    report = sub.add_parser('report', help='Reports').add_subparsers(
        dest='report_command', required=True)
    merge = report.add_parser('merge', help='Merge CSV reports and refit the orders')
    merge.add_argument('inputfilename', nargs='+', help='CSV reports')
    merge.add_argument('-o', '--output', default='summary.csv')
    merge.set_defaults(func=_report_merge)

    cylinder = sub.add_parser('cylinder', help='Flow past a circular cylinder')
    cylinder.add_argument('--dx', help='Particle spacing, a number or D/n')
    cylinder.add_argument('--tfinal', type=float, help='Simulated time (s)')
    cylinder.add_argument('--out', default='forces.csv', help='Force history file')
    cylinder.add_argument('--snapshot-every', type=int, help='Steps between snapshots')
    cylinder.add_argument('--snapshot-prefix', default='cylinder')
    cylinder.add_argument('--no-damping', action='store_true',
                          help='Disable the density diffusion term')
    cylinder.add_argument('--config', help='File of key=value lines')
    cylinder.add_argument('--noprogress', action='store_true', help='Hide progress bars')
    cylinder.set_defaults(func=_cylinder)
    return parser


def _commandline():
    args = _parser().parse_args()
    sys.exit(args.func(args))


def parm2cmd(pp):
    """Command line equivalent of a study parameter set."""
    if pp['kind'] == 'solid':
        commands = ['sphverify', 'verify', '--bc', pp['method'],
                    '--condition', pp['condition'],
                    '--domain', pp['domain'].replace('_', '-')]
    else:
        commands = ['sphverify', 'verify-io', '--method', pp['method'],
                    '--case', pp['case']]
    if pp.get('resolutions'):
        commands.extend(('--resolutions', ','.join(str(n) for n in pp['resolutions'])))
    for ii in ['steps', 'nproc', 'output']:
        if pp.get(ii, None):
            commands.extend(("--{}".format(ii), str(pp[ii])))
    if pp.get('acceptance', False):
        commands.append('--acceptance')
    commands.append('--noprogress')
    return commands
