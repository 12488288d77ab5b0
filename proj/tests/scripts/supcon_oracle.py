"""Direct scalar evaluation of the supervised contrastive loss on a fixed batch.

loss = mean over anchors i with positives of
       -(1/|P(i)|) * sum_{p in P(i)} log( exp(z_i.z_p/t) / sum_{a != i} exp(z_i.z_a/t) )
"""
import math

POINTS = [(1.0, 0.0), (0.6, 0.8), (0.0, 1.0), (-0.8, 0.6)]
CLASSES = [0, 0, 1, 1]
TEMPERATURE = 0.5


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def supcon(points, classes, t):
    terms = []
    for i, zi in enumerate(points):
        positives = [p for p in range(len(points)) if p != i and classes[p] == classes[i]]
        if not positives:
            continue
        denom = sum(math.exp(dot(zi, points[a]) / t) for a in range(len(points)) if a != i)
        total = 0.0
        for p in positives:
            total += math.log(math.exp(dot(zi, points[p]) / t) / denom)
        terms.append(-total / len(positives))
    return sum(terms) / len(terms)


if __name__ == "__main__":
    print(repr(supcon(POINTS, CLASSES, TEMPERATURE)))
