"""
Command-line front end for the shock calibration toolkit.

    python app.py synth --out data
    python app.py train --data data/train.shkd --out runs/net.shkm
    python app.py eval --data data/test.shkd --train-data data/train.shkd --model runs/net.shkm
    python app.py srs --data data/test.shkd --model runs/net.shkm --index 0 --out runs/srs.csv
    python app.py gradcheck
    python app.py reproduce --out runs
"""
import logging
from pathlib import Path

import click
import pandas as pd

from baselines import ae_baseline, design_lowpass, fit_linear
from calibnet import AblationFlags, Architecture, CalibModel, TrainConfig, train
from config import get_config
from exceptions import AcceptanceFailure, IndexOutOfRange, InvalidConfig, ShockCalError
from experiments import (METHODS, ablation_study, calibnet_grad_check, check_ablation_directions,
                         check_srs_closeness, check_table_directions, evaluate_methods, srs_table,
                         waveform_table)
from models import LowEndModel, RigConfig
from storage import load_checkpoint, read_dataset, save_checkpoint, write_dataset
from synth_rig import generate_dataset
from utils import export_reports_excel, peak_histogram, plot_svg, reports_frame, write_csv

cfg = get_config()

logger = logging.getLogger(__name__)

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)
OUTPUT_DIR = click.Path(file_okay=False, path_type=Path)


class ShockCalGroup(click.Group):
    """Command group that turns toolkit errors into their exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ShockCalError as e:
            click.secho(f'❌ {type(e).__name__}: {e}', fg='red', err=True)
            ctx.exit(e.exit_code)


# ============================================================================
# HELPER FUNCTIONS
# ============================================================================

def _banner(title):
    click.secho('=' * 70, err=True)
    click.secho(title, bold=True, err=True)
    click.secho('=' * 70, err=True)


def _parse_dims(ctx, param, value):
    """Parse 'L,Z,P' into three positive integers."""
    try:
        dims = tuple(int(part) for part in value.split(','))
    except ValueError:
        raise click.BadParameter('expected three comma-separated integers, e.g. 30,8,4')
    if len(dims) != 3 or min(dims) < 1:
        raise click.BadParameter('expected three positive integers L,Z,P')
    return dims


def _loss_trace_path(checkpoint):
    return checkpoint.with_name(checkpoint.name + '.losses.csv')


def _write_loss_trace(result, checkpoint):
    """Per-epoch losses next to the checkpoint; models without a PPN have no peak_loss column."""
    frame = pd.DataFrame([record.to_dict() for record in result.trace])
    return write_csv(frame, _loss_trace_path(checkpoint), float_format='%.9g')


def _format_reports(reports):
    """Aligned text table of a method comparison, with each method's wall time."""
    return reports_frame(reports, timing=True).to_string(
        index=False, formatters={'eps_p_percent': '{:.2f}'.format, 'eps_s': '{:.2f}'.format,
                                 'seconds': '{:.3f}'.format})


def _report_checks(checks):
    for check in checks:
        mark, colour = ('✅', 'green') if check.passed else ('❌', 'red')
        click.secho(f'{mark} {check.name}: {check.detail}', fg=colour, err=True)


def _train_model(pairs, arch, train_config, variant):
    if variant == 'ae':
        return ae_baseline(pairs, train_config, arch, seed=train_config.seed)
    return train(CalibModel.build(arch, seed=train_config.seed), pairs, train_config)


# ============================================================================
# COMMANDS
# ============================================================================

@click.group(cls=ShockCalGroup)
@click.option('--log-level', default=None, help='Override SHOCKCAL_LOG_LEVEL')
def cli(log_level):
    """Calibrate low-end shock accelerometer records against a reference sensor."""
    logging.basicConfig(level=(log_level or cfg.LOG_LEVEL).upper(),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', force=True)


@cli.command()
@click.option('--pairs', type=int, default=cfg.N_PAIRS, show_default=True, help='Number of drops')
@click.option('--train', 'train_count', type=int, default=cfg.TRAIN_COUNT, show_default=True,
              help='Pairs in the training split')
@click.option('--seed', type=int, default=cfg.MASTER_SEED, show_default=True, help='Master seed')
@click.option('--peak-min', type=float, default=cfg.PEAK_MIN, show_default=True, help='Lowest peak (g)')
@click.option('--peak-max', type=float, default=cfg.PEAK_MAX, show_default=True, help='Highest peak (g)')
@click.option('--identity', is_flag=True, help='Low-end sensor reproduces the truth exactly')
@click.option('--out', type=OUTPUT_DIR, default=cfg.DATA_FOLDER, show_default=True)
@click.option('--threads', type=int, default=None, help='Worker cap (default SHOCKCAL_THREADS)')
def synth(pairs, train_count, seed, peak_min, peak_max, identity, out, threads):
    """Generate a synthetic drop campaign; prints the training-split peak histogram as CSV."""
    rig = RigConfig(pairs, train_count, (peak_min, peak_max), cfg.SAMPLE_RATE, seed)
    sensor = LowEndModel.identity() if identity else LowEndModel()
    train_pairs, test_pairs = generate_dataset(rig, sensor, threads)

    write_dataset(out / 'train.shkd', train_pairs)
    write_dataset(out / 'test.shkd', test_pairs)
    click.secho(f'✅ {len(train_pairs)} train / {len(test_pairs)} test pairs written to {out}',
                fg='green', err=True)

    histogram = peak_histogram([pair.high.peak_abs() for pair in train_pairs])
    click.echo(histogram.to_csv(index=False, float_format='%.3f', lineterminator='\n'), nl=False)


@cli.command('train')
@click.option('--data', type=EXISTING_FILE, required=True, help='Training dataset (.shkd)')
@click.option('--out', type=OUTPUT_FILE, required=True, help='Checkpoint to write (.shkm)')
@click.option('--epochs', type=int, default=cfg.EPOCHS, show_default=True)
@click.option('--lr', type=float, default=cfg.LEARNING_RATE, show_default=True)
@click.option('--ppn-lr', type=float, default=cfg.PPN_LEARNING_RATE, show_default=True,
              help='Adam step size of the peak prediction network')
@click.option('--batch', type=int, default=cfg.BATCH_SIZE, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--ablate', multiple=True, type=click.Choice(sorted(AblationFlags.ABLATIONS)),
              help='Remove a model component (repeatable)')
@click.option('--variant', type=click.Choice(['net', 'ae']), default='net', show_default=True,
              help='Full calibration network or autoencoder baseline')
def train_command(data, out, epochs, lr, ppn_lr, batch, seed, ablate, variant):
    """Train a calibration model and write its checkpoint and loss trace."""
    pairs = read_dataset(data)
    arch = Architecture(signal_length=len(pairs[0].low), with_ppn=variant == 'net',
                        flags=AblationFlags.from_ablations(ablate))
    result = _train_model(pairs, arch, TrainConfig(epochs, batch, lr, seed, ppn_lr), variant)

    save_checkpoint(out, result.model)
    trace = _write_loss_trace(result, out)
    last = result.trace[-1]
    click.secho(f'✅ {variant} checkpoint {out} (final L^s {last.shape_loss:.4f}); loss trace {trace}',
                fg='green', err=True)


@cli.command('eval')
@click.option('--data', type=EXISTING_FILE, required=True, help='Test dataset (.shkd)')
@click.option('--train-data', type=EXISTING_FILE, help='Training dataset, needed by method lr')
@click.option('--net-model', '--model', 'net_model', type=EXISTING_FILE, help='Calibration network checkpoint')
@click.option('--ae-model', type=EXISTING_FILE, help='Autoencoder checkpoint')
@click.option('--method', 'methods', multiple=True, type=click.Choice(METHODS),
              help='Method to evaluate (repeatable; default: every method with its inputs given)')
@click.option('--lambda', 'ridge_lambda', type=float, default=cfg.RIDGE_LAMBDA, show_default=True,
              help='Ridge penalty of method lr')
@click.option('--report', type=OUTPUT_FILE, help='CSV report path')
@click.option('--xlsx', type=OUTPUT_FILE, help='Excel report path')
@click.option('--threads', type=int, default=None, help='Worker cap (default SHOCKCAL_THREADS)')
def eval_command(data, train_data, net_model, ae_model, methods, ridge_lambda, report, xlsx, threads):
    """Compare calibration methods on a test set."""
    if not methods:
        available = {'lr': train_data, 'ae': ae_model, 'net': net_model}
        methods = [m for m in METHODS if available.get(m, True)]

    test_pairs = read_dataset(data)
    models = {'threads': threads, 'fir': design_lowpass(sample_rate=test_pairs[0].low.sample_rate)}
    if 'lr' in methods and train_data:
        models['linear'] = fit_linear(read_dataset(train_data), ridge_lambda)
    if 'ae' in methods and ae_model:
        models['ae_model'] = load_checkpoint(ae_model)
    if 'net' in methods and net_model:
        models['net_model'] = load_checkpoint(net_model)
        if not models['net_model'].arch.with_ppn:
            raise InvalidConfig(f'{net_model} has no peak prediction network; pass it as --ae-model')

    reports = evaluate_methods(test_pairs, methods, **models)
    click.echo(_format_reports(reports))
    if report:
        write_csv(reports_frame(reports), report)
        click.secho(f'✅ Report written to {report}', fg='green', err=True)
    if xlsx:
        export_reports_excel(reports, xlsx)
        click.secho(f'✅ Excel comparison written to {xlsx}', fg='green', err=True)


@cli.command()
@click.option('--data', type=EXISTING_FILE, required=True, help='Dataset (.shkd)')
@click.option('--model', type=EXISTING_FILE, required=True, help='Calibration network checkpoint')
@click.option('--index', type=int, default=0, show_default=True, help='Pair index in the dataset')
@click.option('--out', type=OUTPUT_FILE, required=True, help='CSV output path')
@click.option('--svg', type=OUTPUT_FILE, help='Optional SVG plot path')
@click.option('--waveform', type=OUTPUT_FILE, help='Optional time-domain CSV of the same pair')
@click.option('--waveform-svg', type=OUTPUT_FILE, help='Optional time-domain SVG plot')
@click.option('--q', 'q_factor', type=float, default=cfg.SRS_Q, show_default=True)
def srs(data, model, index, out, svg, waveform, waveform_svg, q_factor):
    """Shock response spectra (and waveforms) of one pair before and after calibration."""
    pairs = read_dataset(data)
    if not 0 <= index < len(pairs):
        raise IndexOutOfRange(f'index {index} outside a dataset of {len(pairs)} pairs')
    model = load_checkpoint(model)

    table = srs_table(pairs[index], model, q_factor=q_factor)
    write_csv(table, out, float_format='%.9g')
    click.secho(f'✅ SRS of pair {index} ({len(table)} frequencies) written to {out}', fg='green', err=True)
    if svg:
        plot_svg(table, svg, title=f'Pair {index}, Q={q_factor:g}')

    if waveform or waveform_svg:
        samples = waveform_table(pairs[index], model)
        if waveform:
            write_csv(samples, waveform, float_format='%.9g')
            click.secho(f'✅ Waveforms of pair {index} written to {waveform}', fg='green', err=True)
        if waveform_svg:
            plot_svg(samples, waveform_svg, title=f'Pair {index}')


@cli.command()
@click.option('--dims', default=','.join(map(str, cfg.GRADCHECK_DIMS)), show_default=True,
              callback=_parse_dims, help='Signal length, latent width, PPN width')
@click.option('--seed', type=int, default=1, show_default=True)
@click.option('--points', type=int, default=cfg.GRADCHECK_POINTS, show_default=True)
@click.option('--tolerance', type=float, default=cfg.GRADCHECK_TOLERANCE, show_default=True)
@click.option('--corrupt', is_flag=True, hidden=True)
def gradcheck(dims, seed, points, tolerance, corrupt):
    """Check analytic gradients of a reduced model against finite differences."""
    table = calibnet_grad_check(dims, seed, points, tolerance, corrupt=corrupt)
    click.echo(table.to_string(index=False, float_format='{:.3e}'.format))

    worst = table['max_rel_error'].max()
    if worst > tolerance:
        raise AcceptanceFailure(f'max relative error {worst:.3e} exceeds {tolerance:g}')
    click.secho(f'✅ Gradients agree: max relative error {worst:.3e}', fg='green', err=True)


@cli.command()
@click.option('--out', type=OUTPUT_DIR, default=cfg.RUNS_FOLDER, show_default=True)
@click.option('--seed', type=int, default=cfg.MASTER_SEED, show_default=True, help='Master seed')
@click.option('--epochs', type=int, default=cfg.EPOCHS, show_default=True)
@click.option('--seeds', type=int, default=cfg.ABLATION_SEEDS, show_default=True, help='Ablation seeds')
@click.option('--skip-ablation', is_flag=True, help='Only reproduce the method comparison')
@click.option('--threads', type=int, default=None, help='Worker cap (default SHOCKCAL_THREADS)')
def reproduce(out, seed, epochs, seeds, skip_ablation, threads):
    """Run the full experiment and check its directional outcomes."""
    _banner('1. SYNTHETIC CAMPAIGN')
    rig = RigConfig(cfg.N_PAIRS, cfg.TRAIN_COUNT, (cfg.PEAK_MIN, cfg.PEAK_MAX), cfg.SAMPLE_RATE, seed)
    train_pairs, test_pairs = generate_dataset(rig, threads=threads)
    write_dataset(out / 'train.shkd', train_pairs)
    write_dataset(out / 'test.shkd', test_pairs)

    _banner('2. TRAINING')
    arch = Architecture(signal_length=len(train_pairs[0].low))
    train_config = TrainConfig(epochs=epochs)
    models = {}
    for variant in ('net', 'ae'):
        result = _train_model(train_pairs, arch, train_config, variant)
        save_checkpoint(out / f'{variant}.shkm', result.model)
        _write_loss_trace(result, out / f'{variant}.shkm')
        models[variant] = result.model

    _banner('3. METHOD COMPARISON')
    reports = evaluate_methods(test_pairs, METHODS, threads=threads,
                               fir=design_lowpass(sample_rate=rig.sample_rate),
                               linear=fit_linear(train_pairs, cfg.RIDGE_LAMBDA),
                               ae_model=models['ae'], net_model=models['net'])
    click.echo(_format_reports(reports))
    write_csv(reports_frame(reports), out / 'report.csv')
    export_reports_excel(reports, out / 'comparison.xlsx')
    checks = check_table_directions({report.method: report for report in reports})

    _banner('4. SHOCK RESPONSE SPECTRUM AND WAVEFORMS')
    table = srs_table(test_pairs[0], models['net'])
    write_csv(table, out / 'srs.csv', float_format='%.9g')
    plot_svg(table, out / 'srs.svg', title='First test pair')
    samples = waveform_table(test_pairs[0], models['net'])
    write_csv(samples, out / 'waveform.csv', float_format='%.9g')
    plot_svg(samples, out / 'waveform.svg', title='First test pair')
    checks.append(check_srs_closeness(table))

    if not skip_ablation:
        _banner('5. ABLATIONS')
        study = ablation_study(train_pairs, test_pairs, range(seeds), train_config, arch)
        write_csv(study, out / 'ablation.csv')
        checks += check_ablation_directions(study)

    _report_checks(checks)
    write_csv(pd.DataFrame([check.to_dict() for check in checks]), out / 'checks.csv')
    failed = [check.name for check in checks if not check.passed]
    if failed:
        raise AcceptanceFailure(f'{len(failed)} check(s) failed: {", ".join(failed)}')
    click.secho(f'✅ All {len(checks)} checks passed; artefacts in {out}', fg='green', err=True)


if __name__ == '__main__':
    cli()
