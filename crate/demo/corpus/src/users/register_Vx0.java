public ResponseEntity<String> register(@RequestParam String email, @RequestParam String username, @RequestParam String age) {
    String normalized = normalizeEmail(email);
    if (!EMAIL_PATTERN.matcher(normalized).matches()) {
        return ResponseEntity.badRequest().body("invalid email");
    }
    if (username.length() < 3 || username.length() > 32 || !USERNAME_ALLOWED.matcher(username).matches()) {
        return ResponseEntity.badRequest().body("invalid username");
    }
    int years;
    try {
        years = Integer.parseInt(age);
    } catch (NumberFormatException e) {
        return ResponseEntity.badRequest().body("invalid age");
    }
    if (years < 13 || years > 120) {
        return ResponseEntity.badRequest().body("age out of range");
    }
    userRepository.save(new User(normalized, username, years));
    return ResponseEntity.ok("registered");
}
