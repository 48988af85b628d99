# auto split mode stops here even if the remainder is still nonzero
SLICE_CAP = 8

# one-sided products are always taken against the leading slice of X
N_X_PROPOSED = 1

MODES = ("theoretical", "dense", "sparse", "fixed_k")
FIXED_K_CHOICES = (2, 3, 4)

# Operand names used below:
#   "A1".."A3"  slices of A         "Arem"  remainder of A after k-1 slices
#   "B1".."B3"  slices of B         "Brem"  remainder of B after k-1 slices
#   "A", "B"    the full operands   "A-Arem", "A1+A2", "A2+A3" as written
# Each form is accumulated strictly in the listed order.
FIXED_K_FORMS = {
    2: [
        ("A1", "B1"),
        ("A1", "Brem"),
        ("Arem", "B"),
    ],
    3: [
        ("A1", "B1"),
        ("A1", "B2"),
        ("A2", "B1"),
        ("A2", "B2"),
        ("Arem", "B"),
        ("A1+A2", "Brem"),
    ],
    4: [
        ("A1", "B1"),
        ("A1", "B2"),
        ("A2", "B1"),
        ("A1", "B3"),
        ("A2", "B2"),
        ("A3", "B1"),
        ("A-Arem", "Brem"),
        ("A2+A3", "B3"),
        ("A3", "B2"),
        ("Arem", "B"),
    ],
}

MESSAGE_DELTA_BELOW_U = "delta below unit roundoff"
MESSAGE_ZERO_GAP = "minimum eigenvalue gap is zero; clustered or repeated eigenvalues are not supported"
MESSAGE_ZERO_COLUMNS = "all column maxima of X are zero"
MESSAGE_ZERO_SPECTRUM = "max |lambda| is zero"
