"""Partial identification from weight signs and a single covariance line.

Knowing only the sign of one LP-IV weight confines (theta1, theta2) to a
union of half-plane intersections. Two instruments with conflicting signs can
narrow theta2 to an interval. A single instrument with known covariances also
gives a line, so calibrating theta2 determines theta1.
"""

from compshock import SignRestriction, case2_line, counterfactual_theta1, intersect, sign_restriction_set, subset_relations

a = sign_restriction_set(SignRestriction(1, 1, 0.69, "A"))
b = sign_restriction_set(SignRestriction(1, -1, 0.37, "B"))
both = intersect([a, b])
print("A: w1>0 at beta=0.69; B: w1<0 at beta=0.37")
for piece in both.intervals():
    print(f"  branch {piece['branch']}: theta1 in {piece['theta1']}, theta2 in {piece['theta2']}")
print("same beta, opposite signs -> empty:",
      intersect([a, sign_restriction_set(SignRestriction(1, -1, 0.69))]).is_empty)
print("subset relations at beta=0.5:", subset_relations(0.5).relations)

line = case2_line(1.0, 0.5, 0.5)
print("\ncovariance line c_y = c1*theta1 + c2*theta2 with (c_y, c1, c2) = (1, 0.5, 0.5)")
for theta2 in (0.0, 0.68, 1.0, 1.5):
    print(f"  theta2={theta2:4.2f} -> theta1={counterfactual_theta1(line, theta2):.4f}")
