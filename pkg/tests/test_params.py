import pytest

from snsqkd import ChannelParams, ProtocolParams


def test_defaults_match_reference_setup():
    ch = ChannelParams()
    assert (ch.detector_efficiency, ch.dark_count_prob, ch.attenuation_db_per_km) == (0.8, 1e-11, 0.2)
    pr = ProtocolParams()
    assert pr.f == 1.1
    assert pr.q_decoy == pytest.approx((0.5 / 3,) * 3)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"epsilon": 0.0}, "epsilon"),
        ({"epsilon": 1.0}, "epsilon"),
        ({"f": 0.9}, "f"),
        ({"decoy_intensities": (0.2, 0.1)}, "decoy_intensities"),
        ({"q_signal": 0.5, "q_decoy": (0.1, 0.1, 0.1)}, "q_decoy"),
        ({"decoy_mode": "three", "decoy_intensities": (0.1, 0.2)}, "decoy_intensities"),
        ({"decoy_mode": "four"}, "decoy_mode"),
        ({"phase_slice": -0.1}, "phase_slice"),
    ],
)
def test_protocol_validation_names_the_field(kwargs, field):
    with pytest.raises(ValueError, match=f"^{field}:"):
        ProtocolParams(**kwargs)


@pytest.mark.parametrize("kwargs, field", [({"distance_km": -1}, "distance_km"), ({"misalignment": 1.5}, "misalignment"), ({"dark_count_prob": -1e-3}, "dark_count_prob")])
def test_channel_validation_names_the_field(kwargs, field):
    with pytest.raises(ValueError, match=f"^{field}:"):
        ChannelParams(**kwargs)


def test_round_trip():
    pr = ProtocolParams(epsilon=0.123456789, decoy_intensities=(0.0, 0.07, 0.3, 0.5), q_signal=0.2, decoy_mode="three")
    assert ProtocolParams.from_dict(pr.to_dict()) == pr
    ch = ChannelParams(distance_km=123.4, misalignment=0.07)
    assert ChannelParams.from_dict(ch.to_dict()) == ch


def test_replace_resplits_decoy_probabilities():
    pr = ProtocolParams().replace(decoy_intensities=(0.0, 0.1), q_signal=0.6)
    assert pr.q_decoy == pytest.approx((0.2, 0.2))
    assert pr.nonzero_decoys == (0.1,)
