"""Independent reference values, computed with exact rational arithmetic.

The functions here share no code with the package: they take plain nested
lists of counts indexed ``[t][a]`` and return :class:`fractions.Fraction`.
"""

from fractions import Fraction

# Published COMPAS contingency counts, indexed [t][a].
UNBALANCED = {
    "a_t": [[1229, 1402], [874, 1773]],
    "a_that": [[1165, 1546], [938, 1629]],
    "ahat_t": [[1056, 1575], [1115, 1532]],
}
BALANCED = {
    "a_t": [[874, 874], [874, 874]],
    "a_that": [[1145, 948], [603, 800]],
    "ahat_t": [[1083, 665], [896, 852]],
}

# Frozen outputs of ``directional_fractions`` on the tables above.
BA_UNBALANCED_A2T = Fraction(-253016, 6677025)  # -0.0378935...
BA_UNBALANCED_T2A = Fraction(-546001, 6964257)  # -0.0784004...
MULTI_BALANCED_A2T = Fraction(15, 152)  # 0.0986842...
MULTI_BALANCED_T2A = Fraction(231, 3496)  # 0.0660755...


def directional_fractions(data, pred, direction):
    """(BA->, Multi->) for 2x2 count tables with exact rationals."""
    n = sum(map(sum, data))
    rows = [sum(r) for r in data]
    cols = [data[0][a] + data[1][a] for a in range(2)]
    signed, absolute = [], []
    for t in range(2):
        for a in range(2):
            positive = n * data[t][a] > rows[t] * cols[a]
            if direction == "AtoT":
                shift = Fraction(pred[t][a], pred[0][a] + pred[1][a]) - Fraction(data[t][a], cols[a])
            else:
                shift = Fraction(pred[t][a], sum(pred[t])) - Fraction(data[t][a], rows[t])
            signed.append(shift if positive else -shift)
            absolute.append(abs(shift))
    return sum(signed) / 4, sum(absolute) / 4


def heatmap_accuracy_oracle(alpha):
    """Bayes accuracy of predicting T from A on the alpha-perturbed uniform joint."""
    p = [[0.25 + alpha, 0.25], [0.25, 0.25 - alpha]]
    return max(p[0][0], p[1][0]) + max(p[0][1], p[1][1])
