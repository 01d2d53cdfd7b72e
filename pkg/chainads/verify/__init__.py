from chainads.verify.verifier import RejectReason, Verifier, VerifyReport, verify_disjoint_batch, verify_span, verify_window
