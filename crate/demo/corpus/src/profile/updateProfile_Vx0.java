public ResponseEntity<String> updateProfile(@RequestBody ProfileForm form, Principal principal) {
    String bio = form.getBio() == null ? "" : form.getBio().strip();
    if (bio.length() > 500) {
        return ResponseEntity.badRequest().body("bio too long");
    }
    URI website;
    try {
        website = new URI(form.getWebsite());
    } catch (URISyntaxException e) {
        return ResponseEntity.badRequest().body("invalid website");
    }
    if (!"https".equals(website.getScheme())) {
        return ResponseEntity.badRequest().body("website must use https");
    }
    profileService.update(principal.getName(), bio, website.toString());
    return ResponseEntity.ok("updated");
}
