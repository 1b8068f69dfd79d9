import pytest
from hypothesis import given, strategies as st

from rfidmeter.money import CAP_MICRO, CAP_SEN, MICRO_PER_SEN, Money, MoneyRangeError


def test_zero():
    assert Money.zero().micro_rm == 0
    assert Money.zero().sen == 0


def test_from_rm_accepts_common_forms():
    assert Money.from_rm(5).micro_rm == 5_000_000
    assert Money.from_rm("5").micro_rm == 5_000_000
    assert Money.from_rm("5.00").micro_rm == 5_000_000
    assert Money.from_rm("0.50").micro_rm == 500_000
    assert Money.from_rm(7.25).micro_rm == 7_250_000


def test_from_rm_rejects_sub_micro_amounts():
    with pytest.raises(ValueError):
        Money.from_rm("0.0000001")


def test_negative_rejected():
    with pytest.raises(MoneyRangeError):
        Money(-1)
    with pytest.raises(MoneyRangeError):
        Money.from_rm("-1")


def test_cap_enforced():
    assert Money(CAP_MICRO).micro_rm == CAP_MICRO
    with pytest.raises(MoneyRangeError):
        Money(CAP_MICRO + 1)
    with pytest.raises(MoneyRangeError):
        Money.from_sen(CAP_SEN + 1)


def test_sen_floors():
    # 4.846999 RM is 484 sen and change; .sen truncates toward zero.
    assert Money(4_846_999).sen == 484
    assert Money(4_846_999).is_whole_sen is False
    assert Money.from_sen(484).is_whole_sen is True


def test_renderings():
    m = Money.from_rm("5")
    assert m.rm_2dp() == "5.00"
    assert str(m) == "RM5.00"
    assert Money(4_846_154).rm_6dp() == "4.846154"
    # 2dp rendering floors to whole sen rather than rounding up.
    assert Money(4_846_999).rm_2dp() == "4.84"


def test_ordering():
    assert Money.from_rm("0.38") <= Money.from_rm("0.50")
    assert Money.from_rm(1) > Money.from_sen(99)


@given(st.integers(min_value=0, max_value=CAP_SEN))
def test_sen_round_trip(sen):
    assert Money.from_sen(sen).sen == sen
    assert Money.from_sen(sen).micro_rm == sen * MICRO_PER_SEN
