import numpy as np
import pandas as pd
import pytest

from contact import Side, Twist, decompose_twist, descend, pivot_twist
from geometry import ErrorState
from tactile import (
    FRAME_COUNT,
    SensorLayout,
    TactileSequence,
    dump_sequence,
    first_slip_frame,
    incipient_slip,
    render_sequence,
    slip_metric,
)


def _render(shape, gap, dx, dtheta, factor=1.0, **kwargs):
    event = descend(shape, ErrorState(dx, dtheta), gap)
    twist = pivot_twist(event).scaled(factor)
    return render_sequence(decompose_twist(twist, event), twist, **kwargs)


def test_sequence_shape(rectangle, gap):
    seq = _render(rectangle, gap, 10.0, 0.0)
    assert seq.shear.shape == (FRAME_COUNT, 2, 9, 9, 2)
    assert seq.pressure.shape == (FRAME_COUNT, 2, 9, 9)
    assert not np.any(seq.shear[0])
    assert len(seq.frames) == FRAME_COUNT


def test_pure_translation_leaves_pressure_untouched(rectangle, gap):
    seq = _render(rectangle, gap, 10.0, 0.0)
    assert np.abs(seq.pressure).max() == 0.0
    assert np.abs(seq.shear).max() > 0.0


def test_rotation_changes_pressure(rectangle, gap):
    seq = _render(rectangle, gap, 8.0, 10.0)
    assert np.abs(seq.pressure).max() > 0.0


def test_zero_twist_is_bitwise_zero(rectangle, gap):
    event = descend(rectangle, ErrorState(10.0, 0.0), gap)
    twist = Twist((0.0, 1.0), 0.0)
    seq = render_sequence(decompose_twist(twist, event), twist)
    assert not np.any(seq.shear)
    assert not np.any(seq.pressure)


def test_doubling_the_pivot_doubles_the_field(rectangle, gap):
    single = _render(rectangle, gap, 8.0, 10.0)
    double = _render(rectangle, gap, 8.0, 10.0, factor=2.0)
    assert np.allclose(double.shear, 2 * single.shear, atol=1e-12)
    assert np.allclose(double.pressure, 2 * single.pressure, atol=1e-12)


def test_frames_grow_linearly(rectangle, gap):
    seq = _render(rectangle, gap, -9.0, 6.0)
    assert np.allclose(seq.shear[4], 2 * seq.shear[2], atol=1e-9)
    assert np.allclose(seq.pressure[4], 2 * seq.pressure[2], atol=1e-9)


@pytest.mark.parametrize("dx,dtheta", [(10.0, 0.0), (8.0, 10.0), (-12.0, 13.0)])
def test_mirror_contact_swaps_the_pads(rectangle, gap, dx, dtheta):
    seq = _render(rectangle, gap, dx, dtheta)
    mirror = _render(rectangle, gap, -dx, -dtheta)
    for pad, other in ((0, 1), (1, 0)):
        assert np.allclose(mirror.shear[:, pad, ..., 0], -seq.shear[:, other, ..., 0], atol=1e-9)
        assert np.allclose(mirror.shear[:, pad, ..., 1], seq.shear[:, other, ..., 1], atol=1e-9)
        assert np.allclose(mirror.pressure[:, pad], -seq.pressure[:, other], atol=1e-9)


def test_noise_spares_the_reference_frame(rectangle, gap):
    seq = _render(rectangle, gap, 10.0, 0.0, noise_sigma=0.05, rng_seed=3)
    again = _render(rectangle, gap, 10.0, 0.0, noise_sigma=0.05, rng_seed=3)
    clean = _render(rectangle, gap, 10.0, 0.0)
    assert not np.any(seq.shear[0])
    assert np.array_equal(seq.shear, again.shear)
    assert not np.allclose(seq.shear, clean.shear)


def test_negative_noise_raises(rectangle, gap):
    with pytest.raises(ValueError):
        _render(rectangle, gap, 10.0, 0.0, noise_sigma=-1.0)


def test_first_frame_must_be_zero():
    shear = np.zeros((FRAME_COUNT, 2, 3, 3, 2))
    shear[0, 0, 0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        TactileSequence(shear, np.zeros((FRAME_COUNT, 2, 3, 3)))


def test_slip_metric_of_zero_field():
    seq = TactileSequence.zeros()
    assert slip_metric(seq) == 0.0
    assert not incipient_slip(seq, 0.01)
    assert first_slip_frame(seq) is None


def test_slip_metric_increases_during_a_blocked_descent(rectangle, gap):
    seq = _render(rectangle, gap, 10.0, 0.0)
    metrics = [slip_metric(seq.prefix(k)) for k in range(1, FRAME_COUNT + 1)]
    assert metrics[0] == 0.0
    assert all(b > a for a, b in zip(metrics, metrics[1:]))


def test_slip_fires_mid_window_for_reference_contact(rectangle, gap):
    seq = _render(rectangle, gap, 10.0, 0.0)
    assert first_slip_frame(seq, tau_slip=3.0) == 5


def test_every_one_sided_contact_trips_the_monitor(rectangle, gap):
    for dx in np.linspace(-15.3, 15.3, 19):
        for dtheta in np.linspace(-15, 15, 19):
            event = descend(rectangle, ErrorState(float(dx), float(dtheta)), gap)
            if not event.blocked or event.side == Side.BOTH:
                continue
            twist = pivot_twist(event)
            seq = render_sequence(decompose_twist(twist, event), twist)
            assert first_slip_frame(seq) is not None


def test_non_positive_threshold_raises():
    with pytest.raises(ValueError):
        incipient_slip(TactileSequence.zeros(), 0.0)


def test_mirrored_layout_flips_marker_x():
    layout = SensorLayout()
    px, pz = layout.marker_positions()
    mx, mz = layout.mirrored().marker_positions()
    assert np.array_equal(mx, -px)
    assert np.array_equal(mz, pz)


def test_dump_writes_images_and_marker_table(rectangle, gap, tmp_path):
    seq = _render(rectangle, gap, 8.0, 10.0)
    csv_path = dump_sequence(seq, str(tmp_path), prefix="rect")
    images = sorted(tmp_path.glob("rect_f*_*.pgm"))
    assert len(images) == FRAME_COUNT * 2
    data = images[0].read_bytes()
    assert data.startswith(b"P5\n9 9\n255\n")
    assert len(data) == len(b"P5\n9 9\n255\n") + 81

    table = pd.read_csv(csv_path)
    assert list(table.columns) == ["frame", "sensor", "row", "col", "shear_x", "shear_z", "pressure"]
    assert len(table) == FRAME_COUNT * 2 * 81
    assert set(table["sensor"]) == {"A", "B"}
