import pytest

from photoncloud.clock import HOUR, MINUTE, SECOND, Scheduler, VirtualClock


def test_clock_monotone():
    c = VirtualClock()
    c.advance_to(10)
    with pytest.raises(ValueError):
        c.advance_to(5)


def test_events_fire_in_order():
    s = Scheduler()
    log = []
    s.at(3 * SECOND, lambda: log.append("c"))
    s.at(1 * SECOND, lambda: log.append("a"))
    s.at(1 * SECOND, lambda: log.append("b"))  # same time: insertion order
    s.run_until(5 * SECOND)
    assert log == ["a", "b", "c"]
    assert s.clock.now == 5 * SECOND


def test_cancel():
    s = Scheduler()
    log = []
    h = s.at(SECOND, lambda: log.append("x"))
    h.cancel()
    s.run_until(2 * SECOND)
    assert log == []


def test_callbacks_can_schedule():
    s = Scheduler()
    log = []

    def fire():
        log.append(s.clock.now)
        if len(log) < 3:
            s.after(MINUTE, fire)

    s.at(0, fire)
    s.run_until(HOUR)
    assert log == [0, MINUTE, 2 * MINUTE]


def test_every_period():
    s = Scheduler()
    log = []
    s.every(HOUR, lambda: log.append(s.clock.now))
    s.run_until(3 * HOUR)
    assert log == [0, HOUR, 2 * HOUR, 3 * HOUR]


def test_no_past_scheduling():
    s = Scheduler()
    s.run_until(SECOND)
    with pytest.raises(ValueError):
        s.at(0, lambda: None)
