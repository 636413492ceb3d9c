"""Element data for molecular-weight computation and valence rules."""

# IUPAC 2021 standard atomic weights, abridged to the elements that occur
# in small-organic datasets.
ATOMIC_WEIGHTS = {
    "H": 1.008,
    "B": 10.81,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "F": 18.998403163,
    "Si": 28.085,
    "P": 30.973761998,
    "S": 32.06,
    "Cl": 35.45,
    "Br": 79.904,
    "I": 126.90447,
}

# Candidate valences for implicit-hydrogen assignment (smallest fitting
# value wins, the usual organic-subset reading).
DEFAULT_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

# Elements allowed to be written bare (outside brackets).
ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}

# Elements with an aromatic (lowercase) form.
AROMATIC_ELEMENTS = {"b", "c", "n", "o", "p", "s"}
