"""Vehicle classes and the coarse grouping schemes used for evaluation."""

from __future__ import annotations

import enum


class VehicleClass(enum.IntEnum):
    """The five vehicle types, ordered by ordinal used for tie-breaking."""

    BIKE = 0
    CAR = 1
    SUV = 2
    PICKUP = 3
    TRUCK = 4

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "VehicleClass":
        try:
            return _BY_NAME[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown vehicle class {name!r}") from None


_SHORT_NAMES = {
    VehicleClass.BIKE: "bike",
    VehicleClass.CAR: "car",
    VehicleClass.SUV: "suv",
    VehicleClass.PICKUP: "pickup",
    VehicleClass.TRUCK: "truck",
}

_BY_NAME = {name: cls for cls, name in _SHORT_NAMES.items()}

CLASS_NAMES = tuple(_SHORT_NAMES[c] for c in VehicleClass)
N_CLASSES = len(CLASS_NAMES)

GROUP_SCHEMES = ("five", "sml", "car_truck")

_SML = {
    VehicleClass.BIKE: "Small",
    VehicleClass.CAR: "Small",
    VehicleClass.SUV: "Medium",
    VehicleClass.PICKUP: "Medium",
    VehicleClass.TRUCK: "Large",
}

_CAR_TRUCK = {
    VehicleClass.BIKE: "Car-like",
    VehicleClass.CAR: "Car-like",
    VehicleClass.SUV: "Car-like",
    VehicleClass.PICKUP: "Car-like",
    VehicleClass.TRUCK: "Truck-like",
}


def group_prediction(vehicle_class: VehicleClass, scheme: str) -> str:
    """Map a five-class label to the requested grouping scheme's label.

    ``five`` is the identity (returns the short class name), ``sml`` buckets
    into Small/Medium/Large, ``car_truck`` into Car-like/Truck-like.
    """
    vehicle_class = VehicleClass(vehicle_class)
    if scheme == "five":
        return vehicle_class.short_name
    if scheme == "sml":
        return _SML[vehicle_class]
    if scheme == "car_truck":
        return _CAR_TRUCK[vehicle_class]
    raise ValueError(f"unknown grouping scheme {scheme!r}")
